#ifndef TDC_CLI_COMMANDS_HPP
#define TDC_CLI_COMMANDS_HPP

#include <string>
#include <vector>

#include "tdc/cli/config.hpp"

namespace tdc::cli {

/// What a command produced. `report` is human-readable text for stdout;
/// `files` lists written data files (each has a manifest next to it).
struct CommandResult {
  std::string report;
  std::vector<std::string> files;
  long n_diverged = 0;
  bool ok = true; // false: invalid run or failed verdict
};

// Column layouts (fixed):
//   simulate:          t, na_mean, na_stderr, nb_mean, nb_stderr, Xa_mean, Ya_mean,
//                      dXa, dYa, Xb_mean, Yb_mean, dXb, dYb, n_diverged
//                      [, sc_na, sc_nb with semiclassical_trace]
//   steady-scan:       value, sc1_abs_alpha, sc1_stable, ... sc5_*, sde_abs_alpha,
//                      sde_abs_alpha_stderr, na_mean, na_stderr, init_*_re/_im,
//                      n_diverged, valid
//   spectrum:          [epsilon_b,] omega, V_Xa, V_Ya, V_Xb, V_Yb, C_XaXb, C_YaYb,
//                      DS_plus, DS_minus, valid
//   mcwf-compare:      t, pp_na, pp_na_stderr, mc_na, mc_na_stderr, z_na, pp_nb,
//                      pp_nb_stderr, mc_nb, mc_nb_stderr, z_nb
//   fluctuation-check: epsilon_b, Xa_mean, dXa, dYa, ratio_a, Xb_mean, dXb, dYb,
//                      ratio_b, transition, n_diverged

CommandResult cmd_threshold(const RunConfig& c);
CommandResult cmd_simulate(const RunConfig& c);
CommandResult cmd_steady_scan(const RunConfig& c);
CommandResult cmd_spectrum(const RunConfig& c);
CommandResult cmd_mcwf_compare(const RunConfig& c);
CommandResult cmd_kappa(const RunConfig& c);
CommandResult cmd_fluctuation_check(const RunConfig& c);

} // namespace tdc::cli

#endif // TDC_CLI_COMMANDS_HPP
