#ifndef TDC_PARAMS_HPP
#define TDC_PARAMS_HPP

#include <cmath>
#include <limits>
#include <optional>

#include "tdc/types.hpp"

namespace tdc {

/// Cavity model parameters. Every rate and amplitude is expressed in units of
/// the low-mode loss rate gamma_a (gamma_a = 1 is the usual choice).
struct SystemParams {
  double kappa = 0.001;
  double gamma_a = 1.0;
  double gamma_b = 2.0;
  Complex epsilon_b{200.0, 0.0};

  /// Throws InvalidParameter on negative or non-finite entries. Zero rates
  /// are accepted (pure Hamiltonian and pure decay limits).
  void validate() const;

  bool operator==(const SystemParams&) const = default;
};

/// Injected signal on the low-energy mode, switched off at t_off.
struct DriveSchedule {
  Complex epsilon_a{0.0, 0.0};
  std::optional<double> t_off; // nullopt means "never"

  void validate() const;
  Complex epsilon_a_at(double t) const {
    return (t_off && t >= *t_off) ? Complex{} : epsilon_a;
  }

  bool operator==(const DriveSchedule&) const = default;
};

struct SemiclassicalState {
  Complex alpha;
  Complex beta;

  bool finite() const {
    return std::isfinite(alpha.real()) && std::isfinite(alpha.imag()) &&
           std::isfinite(beta.real()) && std::isfinite(beta.imag());
  }
  double norm() const { return std::sqrt(std::norm(alpha) + std::norm(beta)); }
};

enum class Branch { trivial, lower, upper, numeric };

const char* to_string(Branch b);

struct SteadyStateSolution {
  Complex alpha_s;
  Complex beta_s;
  Branch branch = Branch::trivial;
  bool stable = false;
  bool marginal = false; // eigenvalue real part within the stability tolerance of 0
  int phase_index = 0;   // k in theta = (arg(epsilon_b) + 2 pi k) / 3
  double residual = 0.0;
};

} // namespace tdc

#endif // TDC_PARAMS_HPP
