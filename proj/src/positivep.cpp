#include "tdc/positivep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdc/model.hpp"

namespace tdc {

bool PhaseSpacePoint::finite() const {
  for (Complex z : {alpha, alpha_plus, beta, beta_plus})
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

double PhaseSpacePoint::max_abs() const {
  return std::max({std::abs(alpha), std::abs(alpha_plus), std::abs(beta), std::abs(beta_plus)});
}

void EnsembleConfig::validate() const {
  if (n_traj < 1) throw InvalidParameter("n_traj must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final))
    throw InvalidParameter("t_final must be positive");
  if (sample_stride < 1) throw InvalidParameter("sample_stride must be >= 1");
  if (std::isnan(divergence_bound)) throw InvalidParameter("divergence_bound is NaN");
}

long EnsembleConfig::n_steps() const {
  const double steps = t_final / dt;
  const long n = std::lround(steps);
  if (std::abs(steps - static_cast<double>(n)) > 1e-6 * std::max(1.0, steps))
    throw InvalidParameter("t_final must be an integer multiple of dt");
  return n;
}

double default_divergence_bound(const SystemParams& p) {
  const auto mags = steady_state_magnitudes(p);
  return mags.empty() ? 1e6 : 1e3 * mags.back();
}

PhaseSpacePoint pp_drift(const PhaseSpacePoint& x, const SystemParams& p, Complex epsilon_a) {
  const double k = p.kappa;
  return {epsilon_a - p.gamma_a * x.alpha + k * x.alpha_plus * x.alpha_plus * x.beta,
          std::conj(epsilon_a) - p.gamma_a * x.alpha_plus + k * x.alpha * x.alpha * x.beta_plus,
          p.epsilon_b - p.gamma_b * x.beta - (k / 3.0) * x.alpha * x.alpha * x.alpha,
          std::conj(p.epsilon_b) - p.gamma_b * x.beta_plus -
              (k / 3.0) * x.alpha_plus * x.alpha_plus * x.alpha_plus};
}

std::pair<Complex, Complex> pp_noise_amplitudes(const PhaseSpacePoint& x, const SystemParams& p) {
  return {std::sqrt(2.0 * p.kappa * x.alpha_plus * x.beta),
          std::sqrt(2.0 * p.kappa * x.alpha * x.beta_plus)};
}

namespace {

// exp(-rate h) and (1 - exp(-rate h)) / rate, the exact propagator pieces
// for dx = (c - rate x) dt.
struct Decay {
  double E;
  double phi;
  Decay(double rate, double h)
      : E(std::exp(-rate * h)), phi(rate == 0.0 ? h : -std::expm1(-rate * h) / rate) {}
};

struct StepPlan {
  double dt;
  long n_steps;
  long k_off; // injected signal active for steps k < k_off
  long stride;
  double bound;
};

long off_step(const DriveSchedule& s, double dt, long n_steps) {
  if (!s.t_off) return n_steps + 1;
  const double steps = *s.t_off / dt;
  const long k = std::lround(steps);
  if (std::abs(steps - static_cast<double>(k)) > 1e-6 * std::max(1.0, steps))
    throw InvalidParameter("t_off must lie on the integration grid (a multiple of dt)");
  return k;
}

Complex align(Complex g, Complex reference) {
  // principal sqrt may flip sign across the branch cut within one step
  return (g.real() * reference.real() + g.imag() * reference.imag()) < 0.0 ? -g : g;
}

// Integrating-factor Heun. noise() returns the pair (dW1, dW2) for the next
// step; sample(step, x) is called at every sample step. Returns the step at
// which the path left the bound, or -1.
template <typename Noise, typename Sample>
long heun_path(PhaseSpacePoint x, const SystemParams& p, const DriveSchedule& sched,
               const StepPlan& plan, Noise&& noise, Sample&& sample) {
  const double h = plan.dt;
  const double k = p.kappa, k3 = p.kappa / 3.0;
  const Decay da(p.gamma_a, h), db(p.gamma_b, h);
  const Complex fb = db.phi * p.epsilon_b;
  const Complex fbp = db.phi * std::conj(p.epsilon_b);

  if (!x.finite() || x.max_abs() > plan.bound) return 0;
  sample(0L, x);
  for (long step = 0; step < plan.n_steps; ++step) {
    const Complex ea = step < plan.k_off ? sched.epsilon_a : Complex{};
    const Complex fa = da.phi * ea, fap = da.phi * std::conj(ea);
    const auto [w1, w2] = noise();

    // increments of the nonlinear drift and noise at the step start
    const Complex g1 = std::sqrt(2.0 * k * x.alpha_plus * x.beta);
    const Complex g2 = std::sqrt(2.0 * k * x.alpha * x.beta_plus);
    const Complex F0a = k * x.alpha_plus * x.alpha_plus * x.beta * h + g1 * w1;
    const Complex F0ap = k * x.alpha * x.alpha * x.beta_plus * h + g2 * w2;
    const Complex F0b = -k3 * x.alpha * x.alpha * x.alpha * h;
    const Complex F0bp = -k3 * x.alpha_plus * x.alpha_plus * x.alpha_plus * h;

    const PhaseSpacePoint lin{da.E * x.alpha + fa, da.E * x.alpha_plus + fap,
                              db.E * x.beta + fb, db.E * x.beta_plus + fbp};
    const PhaseSpacePoint pred{lin.alpha + da.E * F0a, lin.alpha_plus + da.E * F0ap,
                               lin.beta + db.E * F0b, lin.beta_plus + db.E * F0bp};

    const Complex h1 = align(std::sqrt(2.0 * k * pred.alpha_plus * pred.beta), g1);
    const Complex h2 = align(std::sqrt(2.0 * k * pred.alpha * pred.beta_plus), g2);
    const Complex F1a = k * pred.alpha_plus * pred.alpha_plus * pred.beta * h + h1 * w1;
    const Complex F1ap = k * pred.alpha * pred.alpha * pred.beta_plus * h + h2 * w2;
    const Complex F1b = -k3 * pred.alpha * pred.alpha * pred.alpha * h;
    const Complex F1bp = -k3 * pred.alpha_plus * pred.alpha_plus * pred.alpha_plus * h;

    x.alpha = lin.alpha + 0.5 * (da.E * F0a + F1a);
    x.alpha_plus = lin.alpha_plus + 0.5 * (da.E * F0ap + F1ap);
    x.beta = lin.beta + 0.5 * (db.E * F0b + F1b);
    x.beta_plus = lin.beta_plus + 0.5 * (db.E * F0bp + F1bp);

    if (!(x.max_abs() <= plan.bound)) return step + 1; // also catches NaN
    const long done = step + 1;
    if (done % plan.stride == 0 || done == plan.n_steps) sample(done, x);
  }
  return -1;
}

std::vector<long> sample_steps(long n_steps, long stride) {
  std::vector<long> s;
  for (long k = 0; k <= n_steps; k += stride) s.push_back(k);
  if (s.back() != n_steps) s.push_back(n_steps);
  return s;
}

StepPlan make_plan(const SystemParams& p, const DriveSchedule& sched, const EnsembleConfig& cfg) {
  p.validate();
  sched.validate();
  cfg.validate();
  StepPlan plan;
  plan.dt = cfg.dt;
  plan.n_steps = cfg.n_steps();
  plan.k_off = off_step(sched, cfg.dt, plan.n_steps);
  plan.stride = cfg.sample_stride;
  plan.bound = cfg.divergence_bound > 0.0 ? cfg.divergence_bound : default_divergence_bound(p);
  return plan;
}

// Per-sample accumulators for one block of trajectories.
struct SampleAcc {
  ComplexStat alpha, alpha_plus, beta, beta_plus, na, nb, Xa, Ya, Xb, Yb, Xa2, Ya2, Xb2, Yb2;
  RunningStat abs_alpha;

  void add(const PhaseSpacePoint& x) {
    const Complex I(0, 1);
    alpha.add(x.alpha);
    alpha_plus.add(x.alpha_plus);
    beta.add(x.beta);
    beta_plus.add(x.beta_plus);
    na.add(x.alpha_plus * x.alpha);
    nb.add(x.beta_plus * x.beta);
    Xa.add(x.alpha + x.alpha_plus);
    Ya.add(I * (x.alpha_plus - x.alpha));
    Xb.add(x.beta + x.beta_plus);
    Yb.add(I * (x.beta_plus - x.beta));
    const Complex sa = x.alpha * x.alpha + x.alpha_plus * x.alpha_plus;
    const Complex ca = 1.0 + 2.0 * x.alpha * x.alpha_plus;
    const Complex sb = x.beta * x.beta + x.beta_plus * x.beta_plus;
    const Complex cb = 1.0 + 2.0 * x.beta * x.beta_plus;
    Xa2.add(ca + sa);
    Ya2.add(ca - sa);
    Xb2.add(cb + sb);
    Yb2.add(cb - sb);
    abs_alpha.add(std::abs(x.alpha));
  }

  void merge(const SampleAcc& o) {
    alpha.merge(o.alpha);
    alpha_plus.merge(o.alpha_plus);
    beta.merge(o.beta);
    beta_plus.merge(o.beta_plus);
    na.merge(o.na);
    nb.merge(o.nb);
    Xa.merge(o.Xa);
    Ya.merge(o.Ya);
    Xb.merge(o.Xb);
    Yb.merge(o.Yb);
    Xa2.merge(o.Xa2);
    Ya2.merge(o.Ya2);
    Xb2.merge(o.Xb2);
    Yb2.merge(o.Yb2);
    abs_alpha.merge(o.abs_alpha);
  }
};

struct BlockResult {
  std::vector<SampleAcc> samples;
  long n_used = 0;
  long n_diverged = 0;
};

constexpr long kMaxBlocks = 64;

} // namespace

TrajectoryPath integrate_trajectory(const InitialDistribution& initial, const SystemParams& p,
                                    const DriveSchedule& schedule, const EnsembleConfig& cfg,
                                    std::uint64_t stream_id) {
  const StepPlan plan = make_plan(p, schedule, cfg);
  if (stream_id >= static_cast<std::uint64_t>(cfg.n_traj))
    throw InvalidParameter("stream_id must be below n_traj");
  StreamRng rng(cfg.master_seed, stream_id);
  const double sq = std::sqrt(cfg.dt);
  TrajectoryPath path;
  const long stop = heun_path(
      initial(rng), p, schedule, plan,
      [&] { return std::pair{sq * rng.normal(), sq * rng.normal()}; },
      [&](long step, const PhaseSpacePoint& x) {
        path.times.push_back(static_cast<double>(step) * cfg.dt);
        path.samples.push_back(x);
      });
  if (stop >= 0) {
    path.diverged = true;
    path.diverged_at = static_cast<double>(stop) * cfg.dt;
  }
  return path;
}

TrajectoryPath integrate_trajectory(const PhaseSpacePoint& initial, const SystemParams& p,
                                    const DriveSchedule& schedule, const EnsembleConfig& cfg,
                                    std::uint64_t stream_id) {
  return integrate_trajectory(delta_at(initial), p, schedule, cfg, stream_id);
}

MomentSeries run_ensemble(const InitialDistribution& initial, const SystemParams& p,
                          const DriveSchedule& schedule, const EnsembleConfig& cfg) {
  const StepPlan plan = make_plan(p, schedule, cfg);
  const auto steps = sample_steps(plan.n_steps, plan.stride);
  const std::size_t n_samples = steps.size();
  const long n_blocks = std::min(cfg.n_traj, kMaxBlocks);
  const double sq = std::sqrt(cfg.dt);

  std::vector<BlockResult> blocks(static_cast<std::size_t>(n_blocks));
  for_each_block(blocks.size(), cfg.threads, [&](std::size_t b) {
    BlockResult& out = blocks[b];
    out.samples.assign(n_samples, SampleAcc{});
    std::vector<PhaseSpacePoint> buffer(n_samples);
    const long first = static_cast<long>(b) * cfg.n_traj / n_blocks;
    const long last = static_cast<long>(b + 1) * cfg.n_traj / n_blocks;
    for (long id = first; id < last; ++id) {
      StreamRng rng(cfg.master_seed, static_cast<std::uint64_t>(id));
      std::size_t slot = 0;
      const long stop = heun_path(
          initial(rng), p, schedule, plan,
          [&] { return std::pair{sq * rng.normal(), sq * rng.normal()}; },
          [&](long, const PhaseSpacePoint& x) { buffer[slot++] = x; });
      if (stop >= 0) {
        ++out.n_diverged;
        continue;
      }
      ++out.n_used;
      for (std::size_t i = 0; i < n_samples; ++i) out.samples[i].add(buffer[i]);
    }
  });

  BlockResult total = tree_reduce(std::move(blocks), [](BlockResult& a, const BlockResult& b) {
    if (a.samples.empty()) a.samples.assign(b.samples.size(), SampleAcc{});
    for (std::size_t i = 0; i < b.samples.size(); ++i) a.samples[i].merge(b.samples[i]);
    a.n_used += b.n_used;
    a.n_diverged += b.n_diverged;
  });

  MomentSeries m;
  m.n_traj = cfg.n_traj;
  m.n_used = total.n_used;
  m.n_diverged = total.n_diverged;
  m.valid = static_cast<double>(m.n_diverged) <= 0.01 * static_cast<double>(cfg.n_traj) &&
            m.n_used > 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const SampleAcc& s = total.samples[i];
    m.times.push_back(static_cast<double>(steps[i]) * cfg.dt);
    m.alpha.push_back(s.alpha.estimate());
    m.alpha_plus.push_back(s.alpha_plus.estimate());
    m.beta.push_back(s.beta.estimate());
    m.beta_plus.push_back(s.beta_plus.estimate());
    m.na.push_back(s.na.estimate());
    m.nb.push_back(s.nb.estimate());
    m.Xa.push_back(s.Xa.estimate());
    m.Ya.push_back(s.Ya.estimate());
    m.Xb.push_back(s.Xb.estimate());
    m.Yb.push_back(s.Yb.estimate());
    m.Xa2.push_back(s.Xa2.estimate());
    m.Ya2.push_back(s.Ya2.estimate());
    m.Xb2.push_back(s.Xb2.estimate());
    m.Yb2.push_back(s.Yb2.estimate());
    m.abs_alpha.push_back(s.abs_alpha.estimate());
  }
  return m;
}

MomentSeries run_ensemble(const PhaseSpacePoint& initial, const SystemParams& p,
                          const DriveSchedule& schedule, const EnsembleConfig& cfg) {
  return run_ensemble(delta_at(initial), p, schedule, cfg);
}

namespace {

double checked_sd(const ComplexEstimate& mean, const ComplexEstimate& second) {
  const double mu = mean.mean.real();
  const double var = second.mean.real() - mu * mu;
  const double tol = 5.0 * (second.stderr_re + 2.0 * std::abs(mu) * mean.stderr_re) +
                     1e-12 * std::max(1.0, std::abs(second.mean.real()));
  if (var < -tol)
    throw StatisticsError("negative quadrature variance beyond sampling error (" +
                          std::to_string(var) + ")");
  return std::sqrt(std::max(var, 0.0));
}

ModeQuadratures mode_stats(const ComplexEstimate& X, const ComplexEstimate& Y,
                           const ComplexEstimate& X2, const ComplexEstimate& Y2) {
  ModeQuadratures q;
  q.mean_X = X.mean.real();
  q.mean_Y = Y.mean.real();
  q.delta_X = checked_sd(X, X2);
  q.delta_Y = checked_sd(Y, Y2);
  if (q.mean_X != 0.0) q.ratio_X = q.delta_X / std::abs(q.mean_X);
  else q.ratio_X = q.delta_X > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return q;
}

} // namespace

QuadratureStats quadrature_statistics(const MomentSeries& m, std::size_t i) {
  if (i >= m.size()) throw StatisticsError("sample index out of range");
  if (m.n_used == 0) throw StatisticsError("no surviving trajectories");
  return {mode_stats(m.Xa[i], m.Ya[i], m.Xa2[i], m.Ya2[i]),
          mode_stats(m.Xb[i], m.Yb[i], m.Xb2[i], m.Yb2[i])};
}

bool transition_region_flag(const QuadratureStats& stats, double ratio_threshold) {
  return stats.a.ratio_X > ratio_threshold || stats.b.ratio_X > ratio_threshold;
}

StepAudit step_halving_audit(const PhaseSpacePoint& initial, const SystemParams& p,
                             const DriveSchedule& schedule, const EnsembleConfig& cfg,
                             long n_audit) {
  const StepPlan coarse = make_plan(p, schedule, cfg);
  StepPlan fine = coarse;
  fine.dt = 0.5 * cfg.dt;
  fine.n_steps = 2 * coarse.n_steps;
  fine.k_off = coarse.k_off > coarse.n_steps ? fine.n_steps + 1 : 2 * coarse.k_off;
  fine.stride = fine.n_steps;

  StepPlan c = coarse;
  c.stride = c.n_steps;
  const double sq = std::sqrt(fine.dt);

  StepAudit audit;
  for (long id = 0; id < std::min(n_audit, cfg.n_traj); ++id) {
    PhaseSpacePoint end_c, end_f;
    {
      StreamRng rng(cfg.master_seed, static_cast<std::uint64_t>(id));
      const long stop = heun_path(
          initial, p, schedule, c,
          [&] {
            const double a1 = rng.normal(), a2 = rng.normal();
            const double b1 = rng.normal(), b2 = rng.normal();
            return std::pair{sq * (a1 + b1), sq * (a2 + b2)};
          },
          [&](long, const PhaseSpacePoint& x) { end_c = x; });
      if (stop >= 0) continue;
    }
    {
      StreamRng rng(cfg.master_seed, static_cast<std::uint64_t>(id));
      const long stop = heun_path(
          initial, p, schedule, fine,
          [&] {
            const double a1 = rng.normal(), a2 = rng.normal();
            return std::pair{sq * a1, sq * a2};
          },
          [&](long, const PhaseSpacePoint& x) { end_f = x; });
      if (stop >= 0) continue;
    }
    auto rel = [](Complex a, Complex b) {
      return std::abs(a - b) / std::max(1.0, std::abs(b));
    };
    audit.max_rel_diff_na = std::max(audit.max_rel_diff_na,
                                     rel(end_c.alpha_plus * end_c.alpha, end_f.alpha_plus * end_f.alpha));
    audit.max_rel_diff_nb = std::max(audit.max_rel_diff_nb,
                                     rel(end_c.beta_plus * end_c.beta, end_f.beta_plus * end_f.beta));
    ++audit.n_audited;
  }
  return audit;
}

} // namespace tdc
