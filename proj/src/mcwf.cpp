#include "tdc/mcwf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tdc/ensemble.hpp"
#include "tdc/rng.hpp"

namespace tdc {

void FockConfig::validate() const {
  if (N_a < 1 || N_b < 1) throw ConfigError("Fock cutoffs must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("MCWF dt must be positive");
  if (n_traj < 1) throw ConfigError("MCWF n_traj must be >= 1");
  if (sample_stride < 1) throw ConfigError("MCWF sample_stride must be >= 1");
}

void check_cutoff(Complex amplitude, int cutoff, const char* what) {
  const double n = std::norm(amplitude);
  if (!std::isfinite(n) || n + 4.0 * std::sqrt(n) >= static_cast<double>(cutoff - 1))
    throw ConfigError(std::string("Fock cutoff too small for ") + what + ": <n> = " +
                      std::to_string(n) + " is within 4 sigma of N = " + std::to_string(cutoff));
}

namespace {

using Triplet = Eigen::Triplet<Complex>;

SparseMat lowering(int n) {
  std::vector<Triplet> t;
  for (int k = 1; k < n; ++k) t.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
  SparseMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// op (x) I_m for op acting on the first factor, I_n (x) op for the second.
SparseMat kron_left(const SparseMat& op, int other) {
  std::vector<Triplet> t;
  for (int r = 0; r < op.outerSize(); ++r)
    for (SparseMat::InnerIterator it(op, r); it; ++it)
      for (int j = 0; j < other; ++j)
        t.emplace_back(it.row() * other + j, it.col() * other + j, it.value());
  SparseMat m(op.rows() * other, op.cols() * other);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMat kron_right(int other, const SparseMat& op) {
  std::vector<Triplet> t;
  for (int i = 0; i < other; ++i)
    for (int r = 0; r < op.outerSize(); ++r)
      for (SparseMat::InnerIterator it(op, r); it; ++it)
        t.emplace_back(i * op.rows() + it.row(), i * op.cols() + it.col(), it.value());
  SparseMat m(op.rows() * other, op.cols() * other);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMat diagonal(const Eigen::VectorXd& d) {
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) != 0.0) t.emplace_back(i, i, d(i));
  SparseMat m(d.size(), d.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

} // namespace

OperatorSet build_operators(const SystemParams& p, const FockConfig& fock, Complex epsilon_a) {
  p.validate();
  fock.validate();
  if (p.epsilon_b != Complex{}) {
    if (p.gamma_b == 0.0) throw ConfigError("pump with gamma_b = 0 has no bounded population");
    check_cutoff(p.epsilon_b / p.gamma_b, fock.N_b, "pumped mode b");
  }
  if (epsilon_a != Complex{}) {
    if (p.gamma_a == 0.0) throw ConfigError("signal with gamma_a = 0 has no bounded population");
    check_cutoff(epsilon_a / p.gamma_a, fock.N_a, "injected mode a");
  }

  OperatorSet ops;
  ops.N_a = fock.N_a;
  ops.N_b = fock.N_b;
  ops.a = kron_left(lowering(fock.N_a), fock.N_b);
  ops.b = kron_right(fock.N_a, lowering(fock.N_b));
  ops.ad = ops.a.adjoint();
  ops.bd = ops.b.adjoint();

  const Eigen::Index dim = ops.dim();
  ops.n_a.resize(dim);
  ops.n_b.resize(dim);
  for (int i = 0; i < fock.N_a; ++i)
    for (int j = 0; j < fock.N_b; ++j) {
      ops.n_a(i * fock.N_b + j) = i;
      ops.n_b(i * fock.N_b + j) = j;
    }

  const Complex I(0, 1);
  const SparseMat ad3b = SparseMat(ops.ad * ops.ad) * SparseMat(ops.ad * ops.b);
  const SparseMat a3bd = SparseMat(ops.a * ops.a) * SparseMat(ops.a * ops.bd);
  ops.H_int = (I * (p.kappa / 3.0)) * (ad3b - a3bd);
  ops.H_pump = I * (p.epsilon_b * ops.bd - std::conj(p.epsilon_b) * ops.b);
  ops.H_signal = I * (epsilon_a * ops.ad - std::conj(epsilon_a) * ops.a);
  ops.H_sys = ops.H_int + ops.H_pump + ops.H_signal;

  const double scale = fock.convention == JumpConvention::sde ? 2.0 : 1.0;
  ops.jump_rate = {scale * p.gamma_a, scale * p.gamma_b};
  ops.jumps[0] = std::sqrt(ops.jump_rate[0]) * ops.a;
  ops.jumps[1] = std::sqrt(ops.jump_rate[1]) * ops.b;

  const SparseMat loss =
      diagonal(ops.jump_rate[0] * ops.n_a + ops.jump_rate[1] * ops.n_b);
  ops.H_eff = ops.H_sys - (0.5 * I) * loss;
  ops.H_eff_free = ops.H_int + ops.H_pump - (0.5 * I) * loss;
  ops.H_eff.makeCompressed();
  ops.H_eff_free.makeCompressed();
  return ops;
}

StateVec fock_state(int n_a, int n_b, int N_a, int N_b) {
  if (n_a < 0 || n_a >= N_a || n_b < 0 || n_b >= N_b)
    throw ConfigError("number state outside the truncated basis");
  StateVec psi = StateVec::Zero(static_cast<Eigen::Index>(N_a) * N_b);
  psi(n_a * N_b + n_b) = 1.0;
  return psi;
}

StateVec coherent_state(Complex alpha, Complex beta, int N_a, int N_b) {
  auto amplitudes = [](Complex z, int n) {
    Eigen::VectorXcd c(n);
    c(0) = std::exp(-0.5 * std::norm(z));
    for (int k = 1; k < n; ++k) c(k) = c(k - 1) * z / std::sqrt(static_cast<double>(k));
    return c;
  };
  const Eigen::VectorXcd ca = amplitudes(alpha, N_a), cb = amplitudes(beta, N_b);
  StateVec psi(static_cast<Eigen::Index>(N_a) * N_b);
  for (int i = 0; i < N_a; ++i)
    for (int j = 0; j < N_b; ++j) psi(i * N_b + j) = ca(i) * cb(j);
  const double nrm = psi.norm();
  if (!(nrm > 0.0)) throw ConfigError("coherent state underflows in the truncated basis");
  return psi / nrm;
}

namespace {

long steps_for(double t_final, double dt) {
  const double s = t_final / dt;
  const long n = std::lround(s);
  if (!(t_final > 0.0) || std::abs(s - static_cast<double>(n)) > 1e-6 * std::max(1.0, s))
    throw ConfigError("MCWF t_final must be a positive multiple of dt");
  return n;
}

long signal_off_step(std::optional<double> t_off, double dt, long n_steps) {
  if (!t_off) return n_steps + 1;
  const double s = *t_off / dt;
  const long k = std::lround(s);
  if (std::abs(s - static_cast<double>(k)) > 1e-6 * std::max(1.0, s))
    throw ConfigError("t_off must be a multiple of the MCWF dt");
  return k;
}

// Workspace for RK4 on d psi/dt = -i H psi.
struct Rk4 {
  StateVec k1, k2, k3, k4, tmp;
  explicit Rk4(Eigen::Index n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}

  void step(const SparseMat& H, StateVec& psi, double h) {
    const Complex mi(0, -1);
    k1.noalias() = H * psi;
    k1 *= mi;
    tmp = psi + (0.5 * h) * k1;
    k2.noalias() = H * tmp;
    k2 *= mi;
    tmp = psi + (0.5 * h) * k2;
    k3.noalias() = H * tmp;
    k3 *= mi;
    tmp = psi + h * k3;
    k4.noalias() = H * tmp;
    k4 *= mi;
    psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

double expect_diag(const StateVec& psi, const Eigen::VectorXd& d) {
  return (psi.cwiseAbs2().array() * d.array()).sum();
}

} // namespace

McwfPath mcwf_trajectory(const StateVec& initial, const OperatorSet& ops, const FockConfig& fock,
                         double t_final, std::uint64_t stream_id,
                         std::optional<double> signal_off) {
  if (initial.size() != ops.dim()) throw ConfigError("initial state has the wrong dimension");
  if (std::abs(initial.norm() - 1.0) > 1e-10) throw ConfigError("initial state is not normalized");
  const long n_steps = steps_for(t_final, fock.dt);
  const long k_off = signal_off_step(signal_off, fock.dt, n_steps);

  StreamRng rng(fock.master_seed, stream_id);
  StateVec psi = initial;
  Rk4 rk(ops.dim());
  McwfPath path;
  auto record = [&](long step) {
    path.times.push_back(static_cast<double>(step) * fock.dt);
    path.na.push_back(expect_diag(psi, ops.n_a));
    path.nb.push_back(expect_diag(psi, ops.n_b));
  };
  record(0);

  for (long step = 0; step < n_steps; ++step) {
    const double dp_a = fock.dt * ops.jump_rate[0] * expect_diag(psi, ops.n_a);
    const double dp_b = fock.dt * ops.jump_rate[1] * expect_diag(psi, ops.n_b);
    const double dp = dp_a + dp_b;
    if (dp >= 0.1)
      throw StepSizeError("MCWF jump probability per step " + std::to_string(dp) +
                          " >= 0.1; reduce dt");

    const double r = rng.uniform();
    if (r < dp) {
      const int ch = (r < dp_a) ? 0 : 1;
      StateVec next = ops.jumps[static_cast<std::size_t>(ch)] * psi;
      const double nrm = next.norm();
      if (!(nrm > 1e-300) || !std::isfinite(nrm)) throw NumericalError("MCWF jump norm underflow");
      psi = next / nrm;
      path.jumps.push_back({step, ch});
    }
    // The jump is instantaneous: the step's non-Hermitian evolution follows
    // it either way. Skipping it after a jump biases the decay by O(rate*dt).
    rk.step(step < k_off ? ops.H_eff : ops.H_eff_free, psi, fock.dt);
    const double nrm = psi.norm();
    if (!(nrm > 1e-300) || !std::isfinite(nrm)) throw NumericalError("MCWF state norm underflow");
    psi /= nrm;

    const long done = step + 1;
    if (done % fock.sample_stride == 0 || done == n_steps) record(done);
  }
  path.final_state = std::move(psi);
  return path;
}

MomentSeries mcwf_ensemble(const SystemParams& p, const FockConfig& fock,
                           const DriveSchedule& schedule, const StateVec& initial,
                           double t_final) {
  schedule.validate();
  const OperatorSet ops = build_operators(p, fock, schedule.epsilon_a);
  const long n_blocks = std::min<long>(fock.n_traj, 64);

  struct Block {
    std::vector<RunningStat> na, nb;
    std::vector<double> times;
  };
  std::vector<Block> blocks(static_cast<std::size_t>(n_blocks));
  for_each_block(blocks.size(), fock.threads, [&](std::size_t b) {
    const long first = static_cast<long>(b) * fock.n_traj / n_blocks;
    const long last = static_cast<long>(b + 1) * fock.n_traj / n_blocks;
    Block& out = blocks[b];
    for (long id = first; id < last; ++id) {
      const McwfPath path = mcwf_trajectory(initial, ops, fock, t_final,
                                            static_cast<std::uint64_t>(id), schedule.t_off);
      if (out.na.empty()) {
        out.na.resize(path.na.size());
        out.nb.resize(path.nb.size());
        out.times = path.times;
      }
      for (std::size_t i = 0; i < path.na.size(); ++i) {
        out.na[i].add(path.na[i]);
        out.nb[i].add(path.nb[i]);
      }
    }
  });

  Block total = tree_reduce(std::move(blocks), [](Block& a, const Block& b) {
    if (a.na.empty()) {
      a = b;
      return;
    }
    for (std::size_t i = 0; i < b.na.size(); ++i) {
      a.na[i].merge(b.na[i]);
      a.nb[i].merge(b.nb[i]);
    }
  });

  MomentSeries m;
  m.times = total.times;
  for (std::size_t i = 0; i < total.na.size(); ++i) {
    const Estimate ea = total.na[i].estimate(), eb = total.nb[i].estimate();
    m.na.push_back({{ea.mean, 0.0}, ea.stderr_, 0.0});
    m.nb.push_back({{eb.mean, 0.0}, eb.stderr_, 0.0});
  }
  m.n_traj = m.n_used = fock.n_traj;
  return m;
}

MomentSeries mcwf_ensemble(const SystemParams& p, const FockConfig& fock,
                           const DriveSchedule& schedule, const PhaseSpacePoint& initial,
                           double t_final) {
  if (std::abs(initial.alpha_plus - std::conj(initial.alpha)) > 1e-12 ||
      std::abs(initial.beta_plus - std::conj(initial.beta)) > 1e-12)
    throw ConfigError("MCWF start must be a coherent state (alpha+ = conj(alpha))");
  check_cutoff(initial.alpha, fock.N_a, "initial mode a");
  check_cutoff(initial.beta, fock.N_b, "initial mode b");
  return mcwf_ensemble(p, fock, schedule,
                       coherent_state(initial.alpha, initial.beta, fock.N_a, fock.N_b), t_final);
}

namespace {

Estimate interpolate(const std::vector<double>& t, const std::vector<ComplexEstimate>& v,
                     double x) {
  const auto it = std::lower_bound(t.begin(), t.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
  const std::size_t j = static_cast<std::size_t>(it - t.begin());
  if (j < t.size() && std::abs(t[j] - x) <= 1e-9 * std::max(1.0, std::abs(x)))
    return {v[j].mean.real(), v[j].stderr_re};
  if (j == 0 || j >= t.size()) throw InvalidParameter("interpolation outside the series");
  const double w = (x - t[j - 1]) / (t[j] - t[j - 1]);
  return {(1.0 - w) * v[j - 1].mean.real() + w * v[j].mean.real(),
          (1.0 - w) * v[j - 1].stderr_re + w * v[j].stderr_re};
}

// Standard errors below this are round-off from averaging identical
// deterministic paths, not sampling error.
double roundoff_floor(const Estimate& a, const Estimate& b) {
  return 1e-8 * std::max({1.0, std::abs(a.mean), std::abs(b.mean)});
}

bool sampled(const Estimate& a, const Estimate& b) {
  return std::hypot(a.stderr_, b.stderr_) > roundoff_floor(a, b);
}

double zscore(const Estimate& a, const Estimate& b) {
  const double diff = a.mean - b.mean;
  if (sampled(a, b)) return diff / std::hypot(a.stderr_, b.stderr_);
  return std::abs(diff) <= roundoff_floor(a, b)
             ? 0.0
             : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

} // namespace

MethodComparison compare_methods(const MomentSeries& pp, const MomentSeries& mc) {
  if (pp.times.empty() || mc.times.empty()) throw InvalidParameter("empty series in comparison");
  const double lo = std::max(pp.times.front(), mc.times.front());
  const double hi = std::min(pp.times.back(), mc.times.back());
  if (lo > hi) throw InvalidParameter("series cover disjoint time ranges");

  MethodComparison out;
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < mc.times.size(); ++i) {
    const double t = mc.times[i];
    if (t < lo - 1e-12 || t > hi + 1e-12) continue;
    const Estimate pa = interpolate(pp.times, pp.na, t), pb = interpolate(pp.times, pp.nb, t);
    const Estimate ma{mc.na[i].mean.real(), mc.na[i].stderr_re};
    const Estimate mb{mc.nb[i].mean.real(), mc.nb[i].stderr_re};
    out.times.push_back(t);
    out.pp_na.push_back(pa);
    out.pp_nb.push_back(pb);
    out.mc_na.push_back(ma);
    out.mc_nb.push_back(mb);
    out.z_na.push_back(zscore(pa, ma));
    out.z_nb.push_back(zscore(pb, mb));
    const std::pair<double, bool> zs[2] = {
        {out.z_na.back(), sampled(pa, ma)}, {out.z_nb.back(), sampled(pb, mb)}};
    for (const auto& [z, informative] : zs) {
      out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
      // deterministic points (e.g. the shared initial state) carry no
      // sampling information and would only dilute the mean
      if (!informative && z == 0.0) continue;
      sum += std::abs(z);
      ++count;
    }
  }
  if (out.times.empty()) throw InvalidParameter("no common sample times");
  out.mean_abs_z = count ? sum / static_cast<double>(count) : 0.0;
  out.pass = out.mean_abs_z < 3.0 && (count > 0 || out.max_abs_z == 0.0);
  return out;
}

} // namespace tdc
