#include <doctest.h>

#include <cmath>

#include "tdc/model.hpp"
#include "tdc/positivep.hpp"

using namespace tdc;

namespace {

EnsembleConfig small_cfg(long n, double t, double dt, long stride) {
  EnsembleConfig c;
  c.n_traj = n;
  c.t_final = t;
  c.dt = dt;
  c.sample_stride = stride;
  c.master_seed = 1234;
  c.threads = 1;
  return c;
}

bool same(const ComplexEstimate& a, const ComplexEstimate& b) {
  return a.mean == b.mean && a.stderr_re == b.stderr_re && a.stderr_im == b.stderr_im;
}

} // namespace

TEST_CASE("phase-space drift") {
  SystemParams p;
  auto d = pp_drift({}, p);
  CHECK(d.alpha == Complex(0.0));
  CHECK(d.alpha_plus == Complex(0.0));
  CHECK(d.beta == p.epsilon_b);
  CHECK(d.beta_plus == std::conj(p.epsilon_b));

  d = pp_drift({2.0, 2.0, 10.0, 10.0}, p);
  CHECK(d.alpha.real() == doctest::Approx(-1.96).epsilon(1e-14));
  CHECK(d.beta.real() == doctest::Approx(179.99733333333333).epsilon(1e-14));

  SystemParams q{0.01, 0.7, 1.3, Complex(40.0, -15.0)};
  const Complex ea(0.3, 2.0);
  const Complex a(3.0, 1.0), b(-2.0, 0.5);
  d = pp_drift(PhaseSpacePoint::coherent(a, b), q, ea);
  CHECK(std::abs(d.alpha_plus - std::conj(d.alpha)) < 1e-14);
  CHECK(std::abs(d.beta_plus - std::conj(d.beta)) < 1e-13);
  const auto sc = semiclassical_drift({a, b}, q, ea);
  CHECK(std::abs(d.alpha - sc.alpha) < 1e-14);
  CHECK(std::abs(d.beta - sc.beta) < 1e-13);
}

TEST_CASE("phase-space noise amplitudes") {
  SystemParams p;
  auto [g1, g2] = pp_noise_amplitudes({0.0, 0.0, 5.0, 5.0}, p);
  CHECK(g1 == Complex(0.0));
  CHECK(g2 == Complex(0.0));

  SystemParams h{0.5, 1.0, 1.0, 0.0};
  std::tie(g1, g2) = pp_noise_amplitudes({0.0, -1.0, 1.0, 0.0}, h);
  CHECK(std::abs(g1 - Complex(0.0, 1.0)) < 1e-15);
  std::tie(g1, g2) = pp_noise_amplitudes({0.0, 1.0, 2.0, 0.0}, h);
  CHECK(g1.real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(g1.imag() == 0.0);
}

TEST_CASE("configuration checks") {
  SystemParams p;
  auto c = small_cfg(4, 1.0, 0.01, 10);
  CHECK_THROWS_AS(integrate_trajectory(PhaseSpacePoint{}, p, {}, c, 4), InvalidParameter);
  c.t_final = 1.005;
  c.dt = 0.01;
  CHECK_THROWS_AS(c.n_steps(), InvalidParameter); // 100.5 steps
  c.t_final = 1.0;
  c.dt = 0.3;
  CHECK_THROWS_AS(c.n_steps(), InvalidParameter);
  c.dt = 0.01;
  DriveSchedule d{1.0, 0.255};
  CHECK_THROWS_AS(run_ensemble(PhaseSpacePoint{}, p, d, c), InvalidParameter);
  c.n_traj = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("linear limit is integrated exactly") {
  SystemParams p{0.0, 1.0, 2.0, Complex(200.0, 30.0)};
  DriveSchedule d{Complex(5.0, -1.0), 1.5};
  const Complex a0(3.0, 2.0), b0(-1.0, 0.0);
  const auto c = small_cfg(8, 3.0, 1e-3, 250);
  const auto m = run_ensemble(PhaseSpacePoint::coherent(a0, b0), p, d, c);
  REQUIRE(m.size() == 13);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double t = m.times[i];
    const double ton = std::min(t, 1.5);
    Complex a = a0 * std::exp(-t) + d.epsilon_a * (1.0 - std::exp(-ton)) * std::exp(-(t - ton));
    Complex b = b0 * std::exp(-2.0 * t) + p.epsilon_b / 2.0 * (1.0 - std::exp(-2.0 * t));
    CHECK(std::abs(m.alpha[i].mean - a) < 1e-10 * std::abs(a));
    CHECK(std::abs(m.na[i].mean.real() - std::norm(a)) < 1e-10 * std::norm(a));
    CHECK(std::abs(m.nb[i].mean.real() - std::norm(b)) < 1e-10 * std::norm(b));
    CHECK(m.nb[i].stderr_re < 1e-10 * std::norm(b));
  }
}

TEST_CASE("no down conversion from vacuum below threshold") {
  SystemParams p;
  p.epsilon_b = 50.0;
  const auto m = run_ensemble(PhaseSpacePoint{}, p, {}, small_cfg(32, 5.0, 1e-3, 500));
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m.na[i].mean == Complex(0.0));
    CHECK(m.Xa[i].mean == Complex(0.0));
  }
  CHECK(m.nb.back().mean.real() == doctest::Approx(625.0 * std::pow(1.0 - std::exp(-10.0), 2)));
}

TEST_CASE("determinism and thread-count independence") {
  SystemParams p;
  DriveSchedule d{5.0, 2.0};
  auto c = small_cfg(40, 3.0, 2e-3, 100);
  const auto t1 = integrate_trajectory(PhaseSpacePoint{}, p, d, c, 17);
  const auto t2 = integrate_trajectory(PhaseSpacePoint{}, p, d, c, 17);
  REQUIRE(t1.samples.size() == t2.samples.size());
  for (std::size_t i = 0; i < t1.samples.size(); ++i) CHECK(t1.samples[i] == t2.samples[i]);
  const auto t3 = integrate_trajectory(PhaseSpacePoint{}, p, d, c, 18);
  CHECK_FALSE(t1.samples.back() == t3.samples.back());

  const auto m1 = run_ensemble(PhaseSpacePoint{}, p, d, c);
  c.threads = 3;
  const auto m2 = run_ensemble(PhaseSpacePoint{}, p, d, c);
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    CHECK(same(m1.na[i], m2.na[i]));
    CHECK(same(m1.nb[i], m2.nb[i]));
    CHECK(same(m1.Xa2[i], m2.Xa2[i]));
    CHECK(m1.abs_alpha[i].mean == m2.abs_alpha[i].mean);
  }

  // ensemble samples coincide with the single-path samples of the same stream
  c.n_traj = 1;
  const auto single = run_ensemble(PhaseSpacePoint{}, p, d, c);
  const auto path = integrate_trajectory(PhaseSpacePoint{}, p, d, c, 0);
  CHECK(single.na.back().mean == path.samples.back().alpha_plus * path.samples.back().alpha);
}

TEST_CASE("ensemble moment properties in the seeded regime") {
  SystemParams p;
  DriveSchedule d{5.0, 10.0};
  const auto m = run_ensemble(PhaseSpacePoint{}, p, d, small_cfg(600, 20.0, 2e-3, 500));
  CHECK(m.valid);
  CHECK(m.n_diverged == 0);
  for (std::size_t i = 1; i < m.size(); ++i) {
    // conjugate symmetry of the first moments
    const auto& a = m.alpha[i];
    const auto& ap = m.alpha_plus[i];
    CHECK(std::abs(a.mean.real() - ap.mean.real()) <=
          5.0 * std::hypot(a.stderr_re, ap.stderr_re) + 1e-12);
    CHECK(std::abs(a.mean.imag() + ap.mean.imag()) <=
          5.0 * std::hypot(a.stderr_im, ap.stderr_im) + 1e-12);
    // populations are real
    CHECK(std::abs(m.na[i].mean.imag()) <= 5.0 * m.na[i].stderr_im + 1e-12);
    CHECK(std::abs(m.nb[i].mean.imag()) <= 5.0 * m.nb[i].stderr_im + 1e-12);
    CHECK(m.na[i].stderr_re >= 0.0);
  }
}

TEST_CASE("standard errors shrink like one over root n") {
  SystemParams p;
  DriveSchedule d{5.0, {}};
  const auto big = run_ensemble(PhaseSpacePoint{}, p, d, small_cfg(800, 4.0, 2e-3, 2000));
  const auto half = run_ensemble(PhaseSpacePoint{}, p, d, small_cfg(400, 4.0, 2e-3, 2000));
  const double ratio = half.na.back().stderr_re / big.na.back().stderr_re;
  CHECK(ratio > std::sqrt(2.0) / 1.5);
  CHECK(ratio < std::sqrt(2.0) * 1.5);
}

TEST_CASE("interaction conserves n_a/3 + n_b on average") {
  SystemParams p{0.1, 0.0, 0.0, 0.0};
  const auto m = run_ensemble(PhaseSpacePoint::coherent(3.0, 2.0), p, {},
                              small_cfg(4000, 2.0, 1e-3, 100));
  const double q0 = m.na.front().mean.real() / 3.0 + m.nb.front().mean.real();
  double moved = 0.0;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const double q = m.na[i].mean.real() / 3.0 + m.nb[i].mean.real();
    const double se = m.na[i].stderr_re / 3.0 + m.nb[i].stderr_re;
    CHECK(std::abs(q - q0) <= 5.0 * se);
    moved = std::max(moved, std::abs(m.na[i].mean.real() - 9.0));
  }
  CHECK(moved > 1.0); // population was actually exchanged
}

TEST_CASE("quadrature statistics") {
  SystemParams p;
  p.epsilon_b = 0.0;
  auto c = small_cfg(3, 0.01, 0.01, 1);
  auto vac = run_ensemble(PhaseSpacePoint{}, SystemParams{0.0, 1.0, 1.0, 0.0}, {}, c);
  auto q = quadrature_statistics(vac, 0);
  CHECK(q.a.mean_X == 0.0);
  CHECK(q.a.delta_X == 1.0);
  CHECK(q.a.delta_Y == 1.0);
  CHECK(q.b.delta_Y == 1.0);
  CHECK(std::isinf(q.a.ratio_X));
  CHECK(transition_region_flag(q));

  auto coh = run_ensemble(PhaseSpacePoint::coherent(2.5, 80.0), p, {}, c);
  q = quadrature_statistics(coh, 0);
  CHECK(q.a.mean_X == doctest::Approx(5.0));
  CHECK(q.a.delta_X == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.a.delta_Y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.b.mean_X == doctest::Approx(160.0));
  CHECK(q.b.delta_X == doctest::Approx(1.0).epsilon(1e-9));

  QuadratureStats s;
  s.a = {160.0, 0.0, 0.01, 1.0, 0.01 / 160.0};
  s.b = {160.0, 0.0, 0.01, 1.0, 0.01 / 160.0};
  CHECK_FALSE(transition_region_flag(s));
  s.a.ratio_X = 0.9;
  CHECK(transition_region_flag(s));
  CHECK_FALSE(transition_region_flag(s, 1.0));

  // a variance far below zero cannot be sampling noise
  MomentSeries bad = coh;
  bad.Xa2[0].mean = Complex(20.0, 0.0);
  bad.Xa2[0].stderr_re = 0.01;
  CHECK_THROWS_AS(quadrature_statistics(bad, 0), StatisticsError);
  CHECK_THROWS_AS(quadrature_statistics(bad, 7), StatisticsError);
}

TEST_CASE("divergence handling") {
  SystemParams p;
  auto c = small_cfg(10, 2.0, 1e-3, 100);
  c.divergence_bound = 50.0;
  const auto m = run_ensemble(PhaseSpacePoint{}, p, {}, c);
  CHECK(m.n_diverged == 10);
  CHECK(m.n_used == 0);
  CHECK_FALSE(m.valid);
  CHECK_THROWS_AS(quadrature_statistics(m), StatisticsError);
  const auto path = integrate_trajectory(PhaseSpacePoint{}, p, {}, c, 3);
  CHECK(path.diverged);
  CHECK(path.diverged_at > 0.0);
  CHECK(path.diverged_at < 1.0); // beta passes 50 at t ~ 0.35
  CHECK(path.samples.size() < 21);

  CHECK(default_divergence_bound(p) == doctest::Approx(80705.0).epsilon(1e-3));
  p.epsilon_b = 10.0;
  CHECK(default_divergence_bound(p) == 1e6);
}

TEST_CASE("step-halving audit") {
  SystemParams p;
  DriveSchedule d{5.0, 15.0};
  // measured after the transient: mid-oscillation paths are not pathwise comparable
  const auto audit =
      step_halving_audit(PhaseSpacePoint{}, p, d, small_cfg(10, 30.0, 1e-3, 100), 4);
  CHECK(audit.n_audited == 4);
  CHECK(audit.max_rel_diff_na < 1e-2);
  CHECK(audit.max_rel_diff_nb < 1e-2);
}

TEST_CASE("transition-region trajectories split between the two stable states") {
  // From (30, 30, 0, 0) the mean-field flow reaches the upper branch only
  // above eps_b ~ 105; near there the noise decides each path.
  SystemParams p;
  p.epsilon_b = 104.0;
  const double upper = steady_state_magnitudes(p).back();
  auto c = small_cfg(16, 100.0, 1e-3, 100000);
  int down = 0, up = 0;
  for (std::uint64_t id = 0; id < 16; ++id) {
    const auto path = integrate_trajectory({30.0, 30.0, 0.0, 0.0}, p, {}, c, id);
    REQUIRE_FALSE(path.diverged);
    const double a = std::abs(path.samples.back().alpha);
    if (a < 0.05 * upper) ++down;
    else if (std::abs(a - upper) < 0.1 * upper) ++up;
  }
  CHECK(down + up == 16);
  CHECK(down > 0);
  CHECK(up > 0);
}
