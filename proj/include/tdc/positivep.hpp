#ifndef TDC_POSITIVEP_HPP
#define TDC_POSITIVEP_HPP

// Truncated positive-P stochastic simulation of the driven, damped
// two-mode cavity:
//
//   d alpha  = (eps_a  - gamma_a alpha  + kappa alpha+^2 beta ) dt + sqrt(2 kappa alpha+ beta ) dW1
//   d alpha+ = (eps_a* - gamma_a alpha+ + kappa alpha^2 beta+ ) dt + sqrt(2 kappa alpha beta+) dW2
//   d beta   = (eps_b  - gamma_b beta   - kappa/3 alpha^3 ) dt
//   d beta+  = (eps_b* - gamma_b beta+  - kappa/3 alpha+^3) dt
//
// with independent real Wiener increments dW1, dW2. Trajectory averages of
// alpha+^m alpha^n estimate normally ordered moments <a^dag^m a^n>.

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "tdc/ensemble.hpp"
#include "tdc/params.hpp"
#include "tdc/rng.hpp"
#include "tdc/types.hpp"

namespace tdc {

struct PhaseSpacePoint {
  Complex alpha, alpha_plus, beta, beta_plus;

  /// Point on the conjugate-symmetric slice (alpha+ = alpha*, beta+ = beta*),
  /// i.e. the positive-P image of the coherent state |alpha, beta>.
  static PhaseSpacePoint coherent(Complex alpha, Complex beta) {
    return {alpha, std::conj(alpha), beta, std::conj(beta)};
  }
  bool finite() const;
  double max_abs() const;
  bool operator==(const PhaseSpacePoint&) const = default;
};

struct EnsembleConfig {
  long n_traj = 100000;
  double t_final = 30.0;
  double dt = 1e-3;
  long sample_stride = 100;
  std::uint64_t master_seed = 0;
  double divergence_bound = 0.0; // <= 0 selects default_divergence_bound()
  unsigned threads = 0;          // 0 selects the hardware concurrency

  void validate() const;
  long n_steps() const;
  bool operator==(const EnsembleConfig&) const = default;
};

/// 1e3 times the upper-branch |alpha_s| above threshold, 1e6 otherwise.
double default_divergence_bound(const SystemParams& p);

PhaseSpacePoint pp_drift(const PhaseSpacePoint& x, const SystemParams& p, Complex epsilon_a = {});

/// Principal square roots of 2 kappa alpha+ beta and 2 kappa alpha beta+.
std::pair<Complex, Complex> pp_noise_amplitudes(const PhaseSpacePoint& x, const SystemParams& p);

struct TrajectoryPath {
  std::vector<double> times;
  std::vector<PhaseSpacePoint> samples;
  bool diverged = false;
  double diverged_at = 0.0;
};

/// Draws the starting point of one trajectory. A delta distribution ignores
/// the stream; other vacuum representations can sample from it.
using InitialDistribution = std::function<PhaseSpacePoint(StreamRng&)>;

inline InitialDistribution delta_at(PhaseSpacePoint p) {
  return [p](StreamRng&) { return p; };
}

/// One fixed-step integrating-factor Heun path: the linear loss and drive
/// terms are propagated exactly, the nonlinear drift and the noise by a
/// predictor-corrector. Samples every sample_stride steps (t = 0 included).
TrajectoryPath integrate_trajectory(const InitialDistribution& initial, const SystemParams& p,
                                    const DriveSchedule& schedule, const EnsembleConfig& cfg,
                                    std::uint64_t stream_id);

TrajectoryPath integrate_trajectory(const PhaseSpacePoint& initial, const SystemParams& p,
                                    const DriveSchedule& schedule, const EnsembleConfig& cfg,
                                    std::uint64_t stream_id);

/// Ensemble estimates on the sample grid. Quadratures use X = a + a^dag and
/// Y = i(a^dag - a); squared quadratures are the normally ordered images
/// 1 + 2 alpha alpha+ +- (alpha^2 + alpha+^2).
struct MomentSeries {
  std::vector<double> times;
  std::vector<ComplexEstimate> alpha, alpha_plus, beta, beta_plus;
  std::vector<ComplexEstimate> na, nb;
  std::vector<ComplexEstimate> Xa, Ya, Xb, Yb;
  std::vector<ComplexEstimate> Xa2, Ya2, Xb2, Yb2;
  std::vector<Estimate> abs_alpha; // trajectory mean of |alpha|
  long n_traj = 0;
  long n_used = 0;
  long n_diverged = 0;
  bool valid = true;

  std::size_t size() const { return times.size(); }
};

MomentSeries run_ensemble(const InitialDistribution& initial, const SystemParams& p,
                          const DriveSchedule& schedule, const EnsembleConfig& cfg);

MomentSeries run_ensemble(const PhaseSpacePoint& initial, const SystemParams& p,
                          const DriveSchedule& schedule, const EnsembleConfig& cfg);

struct ModeQuadratures {
  double mean_X = 0.0, mean_Y = 0.0;
  double delta_X = 0.0, delta_Y = 0.0;
  double ratio_X = 0.0; // delta_X / |mean_X|; +inf when mean_X is exactly 0
};

struct QuadratureStats {
  ModeQuadratures a, b;
};

/// Quadrature means and standard deviations at sample `index`. A variance
/// estimate that is negative beyond its sampling error throws StatisticsError.
QuadratureStats quadrature_statistics(const MomentSeries& m, std::size_t index);

inline QuadratureStats quadrature_statistics(const MomentSeries& m) {
  if (m.size() == 0) throw StatisticsError("empty moment series");
  return quadrature_statistics(m, m.size() - 1);
}

inline constexpr double kDefaultRatioThreshold = 0.5;

/// True iff delta_X / |<X>| exceeds the threshold in either mode.
bool transition_region_flag(const QuadratureStats& stats,
                            double ratio_threshold = kDefaultRatioThreshold);

struct StepAudit {
  long n_audited = 0;
  double max_rel_diff_na = 0.0; // final <n_a> trajectory values, dt vs dt/2
  double max_rel_diff_nb = 0.0;
};

/// Integrates the first n_audit streams at dt and dt/2 on the same Brownian
/// path (coarse increments are sums of fine ones) and reports the largest
/// relative change in the final populations.
StepAudit step_halving_audit(const PhaseSpacePoint& initial, const SystemParams& p,
                             const DriveSchedule& schedule, const EnsembleConfig& cfg,
                             long n_audit);

} // namespace tdc

#endif // TDC_POSITIVEP_HPP
