#ifndef TDC_MODEL_HPP
#define TDC_MODEL_HPP

#include <vector>

#include "tdc/params.hpp"
#include "tdc/types.hpp"

namespace tdc {

/// Right-hand side of the mean-field equations
///   d alpha/dt = eps_a + kappa conj(alpha)^2 beta - gamma_a alpha
///   d beta/dt  = eps_b - gamma_b beta - (kappa/3) alpha^3
SemiclassicalState semiclassical_drift(const SemiclassicalState& s, const SystemParams& p,
                                       Complex epsilon_a = {});

/// Oscillation threshold 4 (gamma_a gamma_b)^(3/4) / (3 sqrt(kappa)).
double pump_threshold(const SystemParams& p);

/// Positive real roots r of r^4 - (3|eps_b|/kappa) r + 3 gamma_a gamma_b / kappa^2,
/// ascending. Empty below threshold; at threshold the double root appears twice.
std::vector<double> steady_state_magnitudes(const SystemParams& p);

/// beta_s = (eps_b - kappa alpha_s^3 / 3) / gamma_b.
Complex steady_beta(Complex alpha_s, const SystemParams& p);

/// Closed-form fixed points without injected signal: the trivial solution
/// followed (above threshold) by lower and upper branches in each of the
/// three phases. Stability is attached to every entry.
std::vector<SteadyStateSolution> steady_state_branches(const SystemParams& p);

/// Labels `solution.stable` / `solution.marginal` from the drift matrix
/// eigenvalues and returns the stability verdict.
bool classify_stability(SteadyStateSolution& solution, const SystemParams& p);

struct TimePoint {
  double t;
  SemiclassicalState state;
};

struct SemiclassicalOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double min_step = 1e-12;
  // Stop early once |drift| < steady_tol * |state| has held for steady_hold time units.
  bool stop_when_steady = false;
  double steady_tol = 1e-8;
  double steady_hold = 1.0;
};

struct SemiclassicalTrajectory {
  std::vector<TimePoint> samples;
  bool reached_steady = false;
};

class IntegrationFailure : public NumericalError {
public:
  IntegrationFailure(const std::string& what, double t, SemiclassicalState last)
      : NumericalError(what), time(t), last_state(last) {}
  double time;
  SemiclassicalState last_state;
};

/// Adaptive Dormand-Prince 5(4) integration of the mean-field equations,
/// sampled every `sample_dt` time units. The injected signal is removed at
/// schedule.t_off, which is always an integration breakpoint.
SemiclassicalTrajectory integrate_semiclassical(const SystemParams& p,
                                                const DriveSchedule& schedule,
                                                const SemiclassicalState& initial,
                                                double t_final, double sample_dt,
                                                const SemiclassicalOptions& opts = {});

struct NewtonOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
};

class ConvergenceFailure : public NumericalError {
public:
  ConvergenceFailure(const std::string& what, SemiclassicalState best, double res)
      : NumericalError(what), best_iterate(best), residual(res) {}
  SemiclassicalState best_iterate;
  double residual;
};

/// Damped Newton iteration on the mean-field right-hand side with constant
/// injected signal epsilon_a. Works where no closed form exists.
SteadyStateSolution numeric_steady_state(const SystemParams& p, Complex epsilon_a,
                                         const SemiclassicalState& guess,
                                         const NewtonOptions& opts = {});

/// All distinct fixed points reachable from a fan of real-axis and phase
/// guesses, sorted by |alpha|. Used for scans with a constant injected signal.
std::vector<SteadyStateSolution> numeric_steady_states(const SystemParams& p,
                                                       Complex epsilon_a);

} // namespace tdc

#endif // TDC_MODEL_HPP
