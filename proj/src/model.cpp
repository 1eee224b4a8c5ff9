#include "tdc/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "tdc/spectrum.hpp"

namespace tdc {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

} // namespace

void SystemParams::validate() const {
  if (!(std::isfinite(kappa) && kappa >= 0.0))
    throw InvalidParameter("kappa must be finite and non-negative");
  if (!(std::isfinite(gamma_a) && gamma_a >= 0.0))
    throw InvalidParameter("gamma_a must be finite and non-negative");
  if (!(std::isfinite(gamma_b) && gamma_b >= 0.0))
    throw InvalidParameter("gamma_b must be finite and non-negative");
  if (!finite(epsilon_b)) throw InvalidParameter("epsilon_b must be finite");
}

void DriveSchedule::validate() const {
  if (!finite(epsilon_a)) throw InvalidParameter("epsilon_a must be finite");
  if (t_off && !(std::isfinite(*t_off) && *t_off > 0.0))
    throw InvalidParameter("t_off must be positive (or absent for 'never')");
}

const char* to_string(Branch b) {
  switch (b) {
  case Branch::trivial: return "trivial";
  case Branch::lower: return "lower";
  case Branch::upper: return "upper";
  case Branch::numeric: return "numeric";
  }
  return "?";
}

SemiclassicalState semiclassical_drift(const SemiclassicalState& s, const SystemParams& p,
                                       Complex epsilon_a) {
  const Complex ac = std::conj(s.alpha);
  return {epsilon_a + p.kappa * ac * ac * s.beta - p.gamma_a * s.alpha,
          p.epsilon_b - p.gamma_b * s.beta - (p.kappa / 3.0) * s.alpha * s.alpha * s.alpha};
}

double pump_threshold(const SystemParams& p) {
  if (!(p.kappa > 0.0)) throw InvalidParameter("pump_threshold requires kappa > 0");
  if (!(p.gamma_a > 0.0 && p.gamma_b > 0.0))
    throw InvalidParameter("pump_threshold requires positive loss rates");
  return 4.0 * std::pow(p.gamma_a * p.gamma_b, 0.75) / (3.0 * std::sqrt(p.kappa));
}

std::vector<double> steady_state_magnitudes(const SystemParams& p) {
  p.validate();
  if (!(p.kappa > 0.0)) return {};
  const double lin = 3.0 * std::abs(p.epsilon_b) / p.kappa;
  const double cst = 3.0 * p.gamma_a * p.gamma_b / (p.kappa * p.kappa);
  if (lin == 0.0) return {};
  auto f = [&](double r) { return ((r * r) * (r * r) - lin * r) + cst; };
  auto df = [&](double r) { return 4.0 * r * r * r - lin; };

  // f is convex on r >= 0 with its minimum at r_min; f(0) = cst > 0 and
  // f(lin^(1/3)) = cst > 0, so each root is bracketed on one side of r_min.
  const double r_min = std::cbrt(lin / 4.0);
  const double f_min = f(r_min);
  if (f_min > 0.0) return {};
  if (f_min == 0.0) return {r_min, r_min};

  auto solve = [&](double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 200 && (hi - lo) > 1e-6 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f(mid);
      if ((fm > 0.0) == (flo > 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    double r = 0.5 * (lo + hi);
    for (int it = 0; it < 20; ++it) {
      const double d = df(r);
      if (d == 0.0) break;
      const double step = f(r) / d;
      r -= step;
      if (std::abs(step) <= 1e-15 * r) break;
    }
    return r;
  };
  return {solve(0.0, r_min), solve(r_min, std::cbrt(lin))};
}

Complex steady_beta(Complex alpha_s, const SystemParams& p) {
  return (p.epsilon_b - p.kappa * alpha_s * alpha_s * alpha_s / 3.0) / p.gamma_b;
}

namespace {

double residual_norm(const SemiclassicalState& s, const SystemParams& p, Complex eps_a) {
  return semiclassical_drift(s, p, eps_a).norm();
}

} // namespace

bool classify_stability(SteadyStateSolution& solution, const SystemParams& p) {
  const double m = min_real_eigenvalue(drift_matrix(solution, p));
  solution.marginal = std::abs(m) <= kStabilityTolerance;
  solution.stable = m > kStabilityTolerance;
  return solution.stable;
}

std::vector<SteadyStateSolution> steady_state_branches(const SystemParams& p) {
  p.validate();
  std::vector<SteadyStateSolution> out;
  SteadyStateSolution trivial;
  trivial.alpha_s = 0.0;
  trivial.beta_s = p.epsilon_b / p.gamma_b;
  trivial.branch = Branch::trivial;
  trivial.residual = residual_norm({trivial.alpha_s, trivial.beta_s}, p, {});
  classify_stability(trivial, p);
  out.push_back(trivial);

  const auto mags = steady_state_magnitudes(p);
  if (mags.empty()) return out;
  const double arg0 = std::arg(p.epsilon_b);
  const Branch labels[2] = {Branch::lower, Branch::upper};
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < 3; ++k) {
      SteadyStateSolution s;
      s.alpha_s = std::polar(mags[b], (arg0 + 2.0 * kPi * k) / 3.0);
      s.beta_s = steady_beta(s.alpha_s, p);
      s.branch = labels[b];
      s.phase_index = k;
      s.residual = residual_norm({s.alpha_s, s.beta_s}, p, {});
      classify_stability(s, p);
      out.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

namespace {

using State = Eigen::Vector2cd;

State rhs(const State& y, const SystemParams& p, Complex eps_a) {
  const auto d = semiclassical_drift({y(0), y(1)}, p, eps_a);
  return State(d.alpha, d.beta);
}

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Stepper {
  const SystemParams& p;
  const SemiclassicalOptions& opts;
  double h = 1e-3;
  bool have_steady_since = false;
  double steady_since = 0.0;
  bool steady = false;

  // Advance y from t to t_end exactly, with constant injected signal.
  void advance(State& y, double& t, double t_end, Complex eps_a) {
    State k1 = rhs(y, p, eps_a);
    while (t < t_end) {
      const double remaining = t_end - t;
      double step = std::min(h, remaining);
      if (step < opts.min_step && remaining > opts.min_step)
        throw IntegrationFailure("semiclassical step size underflow", t, {y(0), y(1)});

      const State k2 = rhs(y + step * (a21 * k1), p, eps_a);
      const State k3 = rhs(y + step * (a31 * k1 + a32 * k2), p, eps_a);
      const State k4 = rhs(y + step * (a41 * k1 + a42 * k2 + a43 * k3), p, eps_a);
      const State k5 = rhs(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), p, eps_a);
      const State k6 =
          rhs(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), p, eps_a);
      const State y5 = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const State k7 = rhs(y5, p, eps_a);
      const State err =
          step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double en = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double sc = opts.atol + opts.rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
        en += std::norm(err(i)) / (sc * sc);
      }
      en = std::sqrt(en / 2.0);
      if (!std::isfinite(en)) {
        h = 0.1 * step;
        if (h < opts.min_step)
          throw IntegrationFailure("semiclassical integration produced non-finite values", t,
                                   {y(0), y(1)});
        continue;
      }

      const double factor =
          en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (en <= 1.0) {
        t = (step == remaining) ? t_end : t + step;
        y = y5;
        k1 = k7;
        track_steady(y, k7, t);
        // a step clipped to land on t_end says nothing about the usable size
        if (step >= h) h = step * factor;
      } else {
        h = step * std::max(factor, 0.1);
      }
    }
  }

  void track_steady(const State& y, const State& dy, double t) {
    const bool now = dy.norm() < opts.steady_tol * y.norm();
    if (!now) {
      have_steady_since = false;
      return;
    }
    if (!have_steady_since) {
      have_steady_since = true;
      steady_since = t;
    }
    if (t - steady_since >= opts.steady_hold) steady = true;
  }
};

} // namespace

SemiclassicalTrajectory integrate_semiclassical(const SystemParams& p,
                                                const DriveSchedule& schedule,
                                                const SemiclassicalState& initial,
                                                double t_final, double sample_dt,
                                                const SemiclassicalOptions& opts) {
  p.validate();
  schedule.validate();
  if (!(t_final > 0.0)) throw InvalidParameter("t_final must be positive");
  if (!(sample_dt > 0.0)) throw InvalidParameter("sample_dt must be positive");
  if (!initial.finite()) throw InvalidParameter("initial state must be finite");

  SemiclassicalTrajectory out;
  State y(initial.alpha, initial.beta);
  double t = 0.0;
  out.samples.push_back({t, initial});

  Stepper stepper{p, opts};
  stepper.h = std::min(1e-3, sample_dt);
  const auto n_samples = static_cast<long>(std::ceil(t_final / sample_dt - 1e-9));
  for (long i = 1; i <= n_samples; ++i) {
    const double t_next = std::min(t_final, static_cast<double>(i) * sample_dt);
    if (schedule.t_off && t < *schedule.t_off && *schedule.t_off < t_next) {
      stepper.advance(y, t, *schedule.t_off, schedule.epsilon_a);
    }
    stepper.advance(y, t, t_next, schedule.epsilon_a_at(t));
    out.samples.push_back({t_next, {y(0), y(1)}});
    t = t_next;
    if (opts.stop_when_steady && stepper.steady) {
      out.reached_steady = true;
      break;
    }
  }
  out.reached_steady = out.reached_steady || stepper.steady;
  return out;
}

// ---------------------------------------------------------------------------
// Damped Newton

namespace {

using RVec4 = Eigen::Vector4d;

RVec4 pack(const SemiclassicalState& s) {
  return {s.alpha.real(), s.alpha.imag(), s.beta.real(), s.beta.imag()};
}

SemiclassicalState unpack(const RVec4& v) { return {{v(0), v(1)}, {v(2), v(3)}}; }

RVec4 residual(const RVec4& v, const SystemParams& p, Complex eps_a) {
  return pack(semiclassical_drift(unpack(v), p, eps_a));
}

// Real Jacobian assembled from Wirtinger derivatives: for f(z, conj z),
// df/dx = f_z + f_zbar and df/dy = i (f_z - f_zbar).
Eigen::Matrix4d jacobian(const RVec4& v, const SystemParams& p) {
  const auto s = unpack(v);
  const Complex ac = std::conj(s.alpha);
  const double k = p.kappa;
  // rows: f1 (alpha equation), f2 (beta equation); columns: alpha, beta
  const Complex f1_z[2] = {-p.gamma_a, k * ac * ac};
  const Complex f1_zb[2] = {2.0 * k * ac * s.beta, 0.0};
  const Complex f2_z[2] = {-k * s.alpha * s.alpha, -p.gamma_b};
  const Complex f2_zb[2] = {0.0, 0.0};
  const Complex I(0, 1);

  Eigen::Matrix4d J;
  for (int c = 0; c < 2; ++c) {
    const Complex d1x = f1_z[c] + f1_zb[c], d1y = I * (f1_z[c] - f1_zb[c]);
    const Complex d2x = f2_z[c] + f2_zb[c], d2y = I * (f2_z[c] - f2_zb[c]);
    J(0, 2 * c) = d1x.real();
    J(1, 2 * c) = d1x.imag();
    J(0, 2 * c + 1) = d1y.real();
    J(1, 2 * c + 1) = d1y.imag();
    J(2, 2 * c) = d2x.real();
    J(3, 2 * c) = d2x.imag();
    J(2, 2 * c + 1) = d2y.real();
    J(3, 2 * c + 1) = d2y.imag();
  }
  return J;
}

double scale_of(const RVec4& v) {
  const auto s = unpack(v);
  return std::max({1.0, std::abs(s.alpha), std::abs(s.beta)});
}

} // namespace

SteadyStateSolution numeric_steady_state(const SystemParams& p, Complex epsilon_a,
                                         const SemiclassicalState& guess,
                                         const NewtonOptions& opts) {
  p.validate();
  if (!guess.finite()) throw InvalidParameter("Newton guess must be finite");

  RVec4 x = pack(guess);
  RVec4 F = residual(x, p, epsilon_a);
  double fn = F.norm();
  RVec4 best = x;
  double best_fn = fn;

  for (int it = 0; it < opts.max_iterations && fn >= opts.tolerance * scale_of(x); ++it) {
    Eigen::FullPivLU<Eigen::Matrix4d> lu(jacobian(x, p));
    if (!lu.isInvertible()) break;
    const RVec4 dx = -lu.solve(F);

    double lambda = 1.0;
    RVec4 xt;
    double ft = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      xt = x + lambda * dx;
      ft = residual(xt, p, epsilon_a).norm();
      if (std::isfinite(ft) && ft <= (1.0 - 1e-4 * lambda) * fn) break;
      lambda *= 0.5;
    }
    if (!std::isfinite(ft)) break;
    x = xt;
    F = residual(x, p, epsilon_a);
    fn = F.norm();
    if (fn < best_fn) {
      best = x;
      best_fn = fn;
    }
  }

  if (!(best_fn < opts.tolerance * scale_of(best)))
    throw ConvergenceFailure("numeric_steady_state did not converge", unpack(best), best_fn);

  SteadyStateSolution s;
  const auto st = unpack(best);
  s.alpha_s = st.alpha;
  s.beta_s = st.beta;
  s.branch = Branch::numeric;
  s.residual = best_fn;
  if (epsilon_a == Complex{} && std::abs(s.alpha_s) < 1e-9 * scale_of(best))
    s.branch = Branch::trivial;
  classify_stability(s, p);
  return s;
}

std::vector<SteadyStateSolution> numeric_steady_states(const SystemParams& p,
                                                       Complex epsilon_a) {
  p.validate();
  std::vector<SteadyStateSolution> found;
  const double r_max =
      p.kappa > 0.0 ? 1.5 * std::cbrt(3.0 * std::abs(p.epsilon_b) / p.kappa) + 1.0 : 1.0;
  const double arg0 = std::arg(p.epsilon_b);
  constexpr int n_radial = 60;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i <= n_radial; ++i) {
      const Complex a = std::polar(r_max * i / n_radial, (arg0 + 2.0 * kPi * k) / 3.0);
      try {
        auto s = numeric_steady_state(p, epsilon_a, {a, steady_beta(a, p)});
        const bool dup = std::any_of(found.begin(), found.end(), [&](const auto& f) {
          return std::abs(f.alpha_s - s.alpha_s) + std::abs(f.beta_s - s.beta_s) <
                 1e-6 * std::max(1.0, std::abs(s.alpha_s));
        });
        if (!dup) found.push_back(s);
      } catch (const ConvergenceFailure&) {
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    const double ra = std::abs(a.alpha_s), rb = std::abs(b.alpha_s);
    if (std::abs(ra - rb) > 1e-9 * std::max(1.0, ra)) return ra < rb;
    return std::arg(a.alpha_s) < std::arg(b.alpha_s);
  });
  return found;
}

} // namespace tdc
