#ifndef TDC_MCWF_HPP
#define TDC_MCWF_HPP

// Monte Carlo wave-function unravelling of the cavity master equation in a
// truncated number-state basis, used to cross-check the positive-P engine.
//
// Basis ordering is |n_a, n_b> -> n_a * N_b + n_b, i.e. operators on mode a
// act as (op (x) I_b) and operators on mode b as (I_a (x) op).

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "tdc/params.hpp"
#include "tdc/positivep.hpp"
#include "tdc/types.hpp"

namespace tdc {

using SparseMat = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using StateVec = Eigen::VectorXcd;

/// Jump operators sqrt(2 gamma) a (matches the amplitude decay gamma of the
/// phase-space equations) or sqrt(gamma) a (literal one-half Liouvillian
/// prefactor, available for sensitivity checks).
enum class JumpConvention { sde, literal };

struct FockConfig {
  int N_a = 60;
  int N_b = 25;
  double dt = 1e-3;
  long n_traj = 200;
  std::uint64_t master_seed = 0;
  long sample_stride = 100;
  JumpConvention convention = JumpConvention::sde;
  unsigned threads = 0;

  void validate() const;
  bool operator==(const FockConfig&) const = default;
};

struct OperatorSet {
  int N_a = 0, N_b = 0;
  SparseMat a, ad, b, bd;
  Eigen::VectorXd n_a, n_b; // diagonals of a^dag a and b^dag b
  SparseMat H_int, H_pump, H_signal, H_sys;
  std::array<SparseMat, 2> jumps;    // c_a, c_b
  std::array<double, 2> jump_rate{}; // c^dag c = jump_rate * n
  SparseMat H_eff;                   // with the injected signal
  SparseMat H_eff_free;              // injected signal switched off

  Eigen::Index dim() const { return static_cast<Eigen::Index>(N_a) * N_b; }
};

/// Sparse ladder operators, H_sys = H_int + H_pump (+ injected signal) with
/// hbar = 1, jump operators, and the effective non-Hermitian generator
/// H_eff = H_sys - (i/2) sum c^dag c.
OperatorSet build_operators(const SystemParams& p, const FockConfig& fock,
                            Complex epsilon_a = {});

/// Throws ConfigError if a coherent amplitude of this size does not fit in
/// `cutoff` levels with a 4 sigma margin.
void check_cutoff(Complex amplitude, int cutoff, const char* what);

StateVec fock_state(int n_a, int n_b, int N_a, int N_b);
StateVec coherent_state(Complex alpha, Complex beta, int N_a, int N_b);

struct JumpRecord {
  long step;
  int channel; // 0 = a, 1 = b
  bool operator==(const JumpRecord&) const = default;
};

struct McwfPath {
  std::vector<double> times;
  std::vector<double> na, nb;
  std::vector<JumpRecord> jumps;
  StateVec final_state;
};

class StepSizeError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// First-order MCWF: per step, jump with probability dp = dt sum <c^dag c>
/// (channel chosen in proportion to its share), otherwise propagate with
/// H_eff (RK4 over the step) and renormalize.
McwfPath mcwf_trajectory(const StateVec& initial, const OperatorSet& ops, const FockConfig& fock,
                         double t_final, std::uint64_t stream_id,
                         std::optional<double> signal_off = {});

/// Trajectory-averaged populations in the same MomentSeries layout as the
/// phase-space engine (na, nb and times populated).
MomentSeries mcwf_ensemble(const SystemParams& p, const FockConfig& fock,
                           const DriveSchedule& schedule, const StateVec& initial,
                           double t_final);

/// Coherent-state start |alpha0, beta0>, the number-basis image of a
/// phase-space delta at (alpha0, alpha0*, beta0, beta0*).
MomentSeries mcwf_ensemble(const SystemParams& p, const FockConfig& fock,
                           const DriveSchedule& schedule, const PhaseSpacePoint& initial,
                           double t_final);

struct MethodComparison {
  std::vector<double> times;
  std::vector<Estimate> pp_na, pp_nb, mc_na, mc_nb;
  std::vector<double> z_na, z_nb;
  double max_abs_z = 0.0;
  double mean_abs_z = 0.0;
  bool pass = false;
};

/// Per-time z-scores (difference over combined standard error) on the MCWF
/// time grid, interpolating the phase-space series linearly where the grids
/// differ. Passes iff the mean |z| over points with sampling error is below 3.
/// Combined errors under 1e-8 relative count as round-off: such points must
/// agree to that level and are left out of the mean.
MethodComparison compare_methods(const MomentSeries& pp, const MomentSeries& mc);

} // namespace tdc

#endif // TDC_MCWF_HPP
