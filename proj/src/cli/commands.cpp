#include "tdc/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tdc/cli/output.hpp"
#include "tdc/kappa.hpp"
#include "tdc/mcwf.hpp"
#include "tdc/model.hpp"
#include "tdc/positivep.hpp"
#include "tdc/spectrum.hpp"

namespace tdc::cli {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Writes the table and its manifest; records the file in `res`.
void publish(const RunConfig& c, const char* command, const CsvTable& table, bool valid,
             Clock::time_point t0, CommandResult& res) {
  const std::string bytes = table.str();
  write_atomic(c.output, bytes);
  RunManifest m;
  m.command = command;
  m.config = to_json(c);
  m.version = code_version();
  m.seed = c.resolved_seed();
  m.wall_time_s = seconds_since(t0);
  m.n_diverged = res.n_diverged;
  m.valid = valid;
  m.checksums.emplace_back(c.output, sha256_hex(bytes));
  write_atomic(manifest_path(c.output), m.to_json().dump(2) + "\n");
  res.files.push_back(c.output);
}

Complex with_phase_of(Complex reference, double magnitude) {
  return std::abs(reference) > 0.0 ? magnitude * reference / std::abs(reference)
                                   : Complex(magnitude, 0.0);
}

RunConfig at_scan_value(const RunConfig& c, ScanParameter p, double v) {
  RunConfig r = c;
  switch (p) {
  case ScanParameter::epsilon_b: r.system.epsilon_b = with_phase_of(c.system.epsilon_b, v); break;
  case ScanParameter::epsilon_a: r.drive.epsilon_a = with_phase_of(c.drive.epsilon_a, v); break;
  case ScanParameter::initial_amplitude:
    r.initial.alpha = v;
    r.initial.alpha_plus = v;
    break;
  }
  return r;
}

// Scan points, or the unscanned config as a single point.
std::vector<std::pair<double, RunConfig>> scan_points(const RunConfig& c, ScanParameter fallback) {
  std::vector<std::pair<double, RunConfig>> out;
  if (!c.scan) {
    double v = 0.0;
    switch (fallback) {
    case ScanParameter::epsilon_b: v = std::abs(c.system.epsilon_b); break;
    case ScanParameter::epsilon_a: v = std::abs(c.drive.epsilon_a); break;
    case ScanParameter::initial_amplitude: v = std::abs(c.initial.alpha); break;
    }
    out.emplace_back(v, c);
    return out;
  }
  for (double v : c.scan->values()) out.emplace_back(v, at_scan_value(c, c.scan->parameter, v));
  return out;
}

// Signal that is still on in the long-time limit.
Complex steady_signal(const DriveSchedule& d) { return d.t_off ? Complex{} : d.epsilon_a; }

std::vector<SteadyStateSolution> semiclassical_solutions(const RunConfig& c) {
  const Complex ea = steady_signal(c.drive);
  return ea == Complex{} ? steady_state_branches(c.system) : numeric_steady_states(c.system, ea);
}

// Steady state whose spectrum is reported: the stable solution in the phase
// sector fixed by the signal (or phase index 0 without one) with the largest
// |alpha|; the trivial state when nothing else is stable.
SteadyStateSolution spectrum_state(const RunConfig& c) {
  const Complex ea = steady_signal(c.drive);
  const auto sols = semiclassical_solutions(c);
  const SteadyStateSolution* best = nullptr;
  for (const auto& s : sols) {
    if (!s.stable) continue;
    bool in_sector;
    if (ea == Complex{}) {
      in_sector = s.branch == Branch::trivial || s.phase_index == 0;
    } else {
      const Complex rel = s.alpha_s * std::conj(ea) / std::abs(ea);
      in_sector = std::abs(rel.imag()) <= 1e-6 * std::max(1.0, std::abs(rel));
    }
    if (in_sector && (!best || std::abs(s.alpha_s) > std::abs(best->alpha_s))) best = &s;
  }
  if (!best) throw NumericalError("no stable steady state in the selected phase sector");
  return *best;
}

struct RowStats {
  QuadratureStats q;
  bool ok = true;
};

RowStats final_stats(const MomentSeries& m, std::size_t i) {
  try {
    return {quadrature_statistics(m, i), true};
  } catch (const StatisticsError&) {
    ModeQuadratures nan{kNaN, kNaN, kNaN, kNaN, kNaN};
    return {{nan, nan}, false};
  }
}

std::string fmt(double x) {
  std::ostringstream o;
  o << std::setprecision(10) << x;
  return o.str();
}

} // namespace

CommandResult cmd_threshold(const RunConfig& c) {
  c.validate();
  CommandResult r;
  const double th = pump_threshold(c.system);
  std::ostringstream o;
  o << "pump threshold |epsilon_b| = " << fmt(th) << " (units of gamma_a)\n"
    << "configured |epsilon_b| = " << fmt(std::abs(c.system.epsilon_b)) << " ("
    << fmt(std::abs(c.system.epsilon_b) / th) << " x threshold)\n";
  r.report = o.str();
  return r;
}

CommandResult cmd_simulate(const RunConfig& c) {
  c.validate();
  const auto t0 = Clock::now();
  CommandResult r;
  const EnsembleConfig ec = c.ensemble_config();
  const MomentSeries m = run_ensemble(c.initial, c.system, c.drive, ec);
  r.n_diverged = m.n_diverged;

  std::vector<TimePoint> trace;
  if (c.semiclassical_trace)
    trace = integrate_semiclassical(c.system, c.drive, {c.initial.alpha, c.initial.beta},
                                    ec.t_final, ec.dt * static_cast<double>(ec.sample_stride))
                .samples;

  std::vector<std::string> header{"t",       "na_mean", "na_stderr", "nb_mean", "nb_stderr",
                                  "Xa_mean", "Ya_mean", "dXa",       "dYa",     "Xb_mean",
                                  "Yb_mean", "dXb",     "dYb",       "n_diverged"};
  if (c.semiclassical_trace) {
    header.emplace_back("sc_na");
    header.emplace_back("sc_nb");
  }
  CsvTable t(header);
  long bad_rows = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto st = final_stats(m, i);
    bad_rows += !st.ok;
    t.cell(m.times[i])
        .cell(m.na[i].mean.real())
        .cell(m.na[i].stderr_re)
        .cell(m.nb[i].mean.real())
        .cell(m.nb[i].stderr_re)
        .cell(st.q.a.mean_X)
        .cell(st.q.a.mean_Y)
        .cell(st.q.a.delta_X)
        .cell(st.q.a.delta_Y)
        .cell(st.q.b.mean_X)
        .cell(st.q.b.mean_Y)
        .cell(st.q.b.delta_X)
        .cell(st.q.b.delta_Y)
        .cell(m.n_diverged);
    if (c.semiclassical_trace) {
      // the trace may hold an extra breakpoint sample at t_off
      const double tol = 1e-9 * std::max(1.0, m.times[i]);
      while (k < trace.size() && trace[k].t < m.times[i] - tol) ++k;
      if (k < trace.size() && std::abs(trace[k].t - m.times[i]) <= tol)
        t.cell(std::norm(trace[k].state.alpha)).cell(std::norm(trace[k].state.beta));
      else
        t.empty().empty();
    }
    t.end_row();
  }
  r.ok = m.valid && bad_rows == 0;
  publish(c, "simulate", t, m.valid, t0, r);

  std::ostringstream o;
  o << "simulate: " << m.n_traj << " trajectories, " << m.size() << " samples, "
    << m.n_diverged << " diverged" << (m.valid ? "" : " (INVALID RUN: over 1% diverged)") << "\n";
  if (m.size() > 0) {
    const auto i = m.size() - 1;
    o << "final <n_a> = " << fmt(m.na[i].mean.real()) << " +- " << fmt(m.na[i].stderr_re)
      << ", <n_b> = " << fmt(m.nb[i].mean.real()) << " +- " << fmt(m.nb[i].stderr_re) << "\n";
  }
  if (bad_rows) o << bad_rows << " samples had negative variance estimates (written as nan)\n";
  o << "wrote " << c.output << "\n";
  r.report = o.str();
  return r;
}

CommandResult cmd_steady_scan(const RunConfig& c) {
  c.validate();
  if (!c.scan) throw ConfigError("steady-scan needs a scan section");
  const auto t0 = Clock::now();
  CommandResult r;
  constexpr int kBranchColumns = 5;

  std::vector<std::string> header{to_string(c.scan->parameter)};
  for (int b = 1; b <= kBranchColumns; ++b) {
    header.push_back("sc" + std::to_string(b) + "_abs_alpha");
    header.push_back("sc" + std::to_string(b) + "_stable");
  }
  for (const char* h : {"sde_abs_alpha", "sde_abs_alpha_stderr", "na_mean", "na_stderr",
                        "init_alpha_re", "init_alpha_im", "init_alpha_plus_re",
                        "init_alpha_plus_im", "init_beta_re", "init_beta_im", "init_beta_plus_re",
                        "init_beta_plus_im", "n_diverged", "valid"})
    header.emplace_back(h);
  CsvTable t(header);

  const EnsembleConfig ec = c.ensemble_config();
  bool all_valid = true;
  for (const auto& [v, rc] : scan_points(c, c.scan->parameter)) {
    // distinct magnitudes; rotated copies share |alpha| and stability
    std::vector<std::pair<double, bool>> mags;
    for (const auto& s : semiclassical_solutions(rc)) {
      const double a = std::abs(s.alpha_s);
      auto it = std::find_if(mags.begin(), mags.end(), [&](const auto& m) {
        return std::abs(m.first - a) <= 1e-6 * std::max(1.0, a);
      });
      if (it == mags.end())
        mags.emplace_back(a, s.stable);
      else
        it->second = it->second || s.stable;
    }
    std::sort(mags.begin(), mags.end());

    const MomentSeries m = run_ensemble(rc.initial, rc.system, rc.drive, ec);
    r.n_diverged += m.n_diverged;
    all_valid = all_valid && m.valid;
    const auto last = m.size() - 1;

    t.cell(v);
    for (int b = 0; b < kBranchColumns; ++b) {
      if (b < static_cast<int>(mags.size()))
        t.cell(mags[b].first).cell(mags[b].second);
      else
        t.empty().empty();
    }
    const auto& x = rc.initial;
    t.cell(m.abs_alpha[last].mean)
        .cell(m.abs_alpha[last].stderr_)
        .cell(m.na[last].mean.real())
        .cell(m.na[last].stderr_re)
        .cell(x.alpha.real())
        .cell(x.alpha.imag())
        .cell(x.alpha_plus.real())
        .cell(x.alpha_plus.imag())
        .cell(x.beta.real())
        .cell(x.beta.imag())
        .cell(x.beta_plus.real())
        .cell(x.beta_plus.imag())
        .cell(m.n_diverged)
        .cell(m.valid);
    t.end_row();
  }
  r.ok = all_valid;
  publish(c, "steady-scan", t, all_valid, t0, r);
  r.report = "steady-scan: " + std::to_string(t.rows()) + " rows, " +
             std::to_string(r.n_diverged) + " diverged trajectories\nwrote " + c.output + "\n";
  return r;
}

CommandResult cmd_spectrum(const RunConfig& c) {
  c.validate();
  const auto t0 = Clock::now();
  CommandResult r;
  const auto omegas = frequency_grid(c.spectrum.omega_max, c.spectrum.n_points);

  std::vector<std::string> header;
  if (c.scan) header.emplace_back(to_string(c.scan->parameter));
  for (const char* h : {"omega", "V_Xa", "V_Ya", "V_Xb", "V_Yb", "C_XaXb", "C_YaYb", "DS_plus",
                        "DS_minus", "valid"})
    header.emplace_back(h);
  CsvTable t(header);

  std::ostringstream o;
  long invalid = 0;
  for (const auto& [v, rc] : scan_points(c, ScanParameter::epsilon_b)) {
    const SteadyStateSolution s = spectrum_state(rc);
    bool valid = true;
    // A trivial state has <X> = 0, so the ratio test does not apply to it.
    if (rc.spectrum.fluctuation_check && s.branch != Branch::trivial) {
      const MomentSeries m = run_ensemble(rc.initial, rc.system, rc.drive, c.ensemble_config());
      r.n_diverged += m.n_diverged;
      const auto st = final_stats(m, m.size() - 1);
      valid = st.ok && m.valid && !transition_region_flag(st.q, rc.spectrum.ratio_threshold);
    }
    invalid += !valid;
    const SpectrumResult sp = spectrum_scan(s, rc.system, omegas, valid);
    double min_ya = 1e300, min_yb = 1e300, min_dsp = 1e300, min_dsm = 1e300;
    for (const auto& row : sp.rows) {
      if (c.scan) t.cell(v);
      t.cell(row.omega)
          .cell(row.V_Xa)
          .cell(row.V_Ya)
          .cell(row.V_Xb)
          .cell(row.V_Yb)
          .cell(row.C_XaXb)
          .cell(row.C_YaYb)
          .cell(row.DS_plus)
          .cell(row.DS_minus)
          .cell(sp.valid);
      t.end_row();
      min_ya = std::min(min_ya, row.V_Ya);
      min_yb = std::min(min_yb, row.V_Yb);
      min_dsp = std::min(min_dsp, row.DS_plus);
      min_dsm = std::min(min_dsm, row.DS_minus);
    }
    o << "epsilon_b = " << fmt(std::abs(rc.system.epsilon_b)) << " (" << to_string(s.branch)
      << " state, |alpha_s| = " << fmt(std::abs(s.alpha_s)) << "): min V_Ya = " << fmt(min_ya)
      << ", min V_Yb = " << fmt(min_yb) << ", min DS+ = " << fmt(min_dsp)
      << ", min DS- = " << fmt(min_dsm) << (valid ? "" : " [invalid: transition region]")
      << "\n";
  }
  publish(c, "spectrum", t, invalid == 0, t0, r);
  o << "wrote " << c.output << "\n";
  r.report = o.str();
  return r;
}

CommandResult cmd_mcwf_compare(const RunConfig& c) {
  c.validate();
  if (!c.mcwf) throw ConfigError("mcwf-compare needs an mcwf section");
  const auto t0 = Clock::now();
  CommandResult r;

  EnsembleConfig ec = c.ensemble_config();
  if (c.mcwf->t_final) ec.t_final = *c.mcwf->t_final;
  FockConfig fock = c.mcwf->fock;
  fock.master_seed = ec.master_seed;
  const SystemParams mp = c.mcwf->system ? *c.mcwf->system : c.system;

  const MomentSeries pp = run_ensemble(c.initial, c.system, c.drive, ec);
  const MomentSeries mc = mcwf_ensemble(mp, fock, c.drive, c.initial, ec.t_final);
  r.n_diverged = pp.n_diverged;
  const MethodComparison cmp = compare_methods(pp, mc);

  CsvTable t({"t", "pp_na", "pp_na_stderr", "mc_na", "mc_na_stderr", "z_na", "pp_nb",
              "pp_nb_stderr", "mc_nb", "mc_nb_stderr", "z_nb"});
  for (std::size_t i = 0; i < cmp.times.size(); ++i) {
    t.cell(cmp.times[i])
        .cell(cmp.pp_na[i].mean)
        .cell(cmp.pp_na[i].stderr_)
        .cell(cmp.mc_na[i].mean)
        .cell(cmp.mc_na[i].stderr_)
        .cell(cmp.z_na[i])
        .cell(cmp.pp_nb[i].mean)
        .cell(cmp.pp_nb[i].stderr_)
        .cell(cmp.mc_nb[i].mean)
        .cell(cmp.mc_nb[i].stderr_)
        .cell(cmp.z_nb[i]);
    t.end_row();
  }
  r.ok = cmp.pass && pp.valid;
  publish(c, "mcwf-compare", t, pp.valid, t0, r);

  std::ostringstream o;
  o << "mcwf-compare: " << pp.n_traj << " phase-space vs " << mc.n_traj
    << " wave-function trajectories\nmean |z| = " << fmt(cmp.mean_abs_z)
    << ", max |z| = " << fmt(cmp.max_abs_z) << "\nverdict: " << (cmp.pass ? "PASS" : "FAIL")
    << "\nwrote " << c.output << "\n";
  r.report = o.str();
  return r;
}

CommandResult cmd_kappa(const RunConfig& c) {
  CommandResult r;
  MaterialGeometry g = c.kappa.geometry;
  std::ostringstream o;
  if (c.kappa.profile_file) {
    g.sigma = modal_overlap(read_mode_profiles(*c.kappa.profile_file));
    o << "modal overlap from " << *c.kappa.profile_file << ": sigma = " << fmt(g.sigma)
      << " 1/m^2\n";
  }
  const double k = estimate_kappa(g);
  o << "kappa = " << fmt(k) << " 1/s\n";
  if (c.kappa.gamma_a_si) o << "kappa / gamma_a = " << fmt(k / *c.kappa.gamma_a_si) << "\n";
  if (k == 0.0) o << "mode orders are not phase matched (m_b != 3 m_a)\n";
  r.report = o.str();
  return r;
}

CommandResult cmd_fluctuation_check(const RunConfig& c) {
  c.validate();
  const auto t0 = Clock::now();
  CommandResult r;
  const ScanParameter p = c.scan ? c.scan->parameter : ScanParameter::epsilon_b;
  CsvTable t({to_string(p), "Xa_mean", "dXa", "dYa", "ratio_a", "Xb_mean", "dXb", "dYb",
              "ratio_b", "transition", "n_diverged"});
  const EnsembleConfig ec = c.ensemble_config();
  std::ostringstream o;
  bool all_valid = true;
  for (const auto& [v, rc] : scan_points(c, p)) {
    const MomentSeries m = run_ensemble(rc.initial, rc.system, rc.drive, ec);
    r.n_diverged += m.n_diverged;
    all_valid = all_valid && m.valid;
    const auto st = final_stats(m, m.size() - 1);
    // unusable statistics are reported as a transition point
    const bool flag = !st.ok || transition_region_flag(st.q, c.spectrum.ratio_threshold);
    t.cell(v)
        .cell(st.q.a.mean_X)
        .cell(st.q.a.delta_X)
        .cell(st.q.a.delta_Y)
        .cell(st.q.a.ratio_X)
        .cell(st.q.b.mean_X)
        .cell(st.q.b.delta_X)
        .cell(st.q.b.delta_Y)
        .cell(st.q.b.ratio_X)
        .cell(flag)
        .cell(m.n_diverged);
    t.end_row();
    if (flag) o << to_string(p) << " = " << fmt(v) << ": transition region\n";
  }
  r.ok = all_valid;
  publish(c, "fluctuation-check", t, all_valid, t0, r);
  o << "wrote " << c.output << "\n";
  r.report = o.str();
  return r;
}

} // namespace tdc::cli
