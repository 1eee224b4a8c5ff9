#ifndef TDC_CLI_CONFIG_HPP
#define TDC_CLI_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdc/kappa.hpp"
#include "tdc/mcwf.hpp"
#include "tdc/params.hpp"
#include "tdc/positivep.hpp"

namespace tdc::cli {

struct SpectrumSettings {
  double omega_max = 20.0;
  int n_points = 400;
  double ratio_threshold = kDefaultRatioThreshold;
  // Run a phase-space ensemble at each pump value and gate rows on its
  // quadrature fluctuations. Off by default: it costs a full simulation.
  bool fluctuation_check = false;

  bool operator==(const SpectrumSettings&) const = default;
};

struct McwfSettings {
  FockConfig fock;
  std::optional<double> t_final;       // defaults to ensemble.t_final
  std::optional<SystemParams> system;  // override for the MCWF side only

  bool operator==(const McwfSettings&) const = default;
};

enum class ScanParameter { epsilon_b, epsilon_a, initial_amplitude };

struct ScanSpec {
  ScanParameter parameter = ScanParameter::epsilon_b;
  double start = 0.0, stop = 0.0;
  int steps = 1;

  std::vector<double> values() const;
  bool operator==(const ScanSpec&) const = default;
};

// Defaults: nitride microring, L = 2 pi x 20 um, 194 THz signal mode.
struct KappaSettings {
  MaterialGeometry geometry{1.5e-20, 2.0 * kPi * 194e12, 4.0, 4.0, 2.0 * kPi * 20e-6, 0.43e12, 1, 3};
  std::optional<std::string> profile_file; // replaces geometry.sigma when set
  std::optional<double> gamma_a_si = 1.5e9; // 1/s, reports kappa / gamma_a

  bool operator==(const KappaSettings&) const = default;
};

struct RunConfig {
  SystemParams system;
  DriveSchedule drive{Complex(5.0, 0.0), 15.0};
  PhaseSpacePoint initial{};
  EnsembleConfig ensemble;
  std::optional<std::uint64_t> seed; // nullopt: derived from the config hash
  SpectrumSettings spectrum;
  std::optional<McwfSettings> mcwf;
  std::optional<ScanSpec> scan;
  KappaSettings kappa;
  std::string output = "out.csv";
  bool semiclassical_trace = false;

  /// Throws ConfigError on any invalid sub-config.
  void validate() const;
  /// Explicit seed, or the first 8 bytes of SHA-256 over the canonical JSON
  /// with the seed removed.
  std::uint64_t resolved_seed() const;
  /// Ensemble config with the resolved seed filled in.
  EnsembleConfig ensemble_config() const;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys take their defaults; unknown keys are rejected.
RunConfig from_json(const nlohmann::json& j);

/// Raw JSON of a config file, comments allowed. Overrides should be applied
/// here, before from_json fills in defaults.
nlohmann::json load_config_json(const std::string& path);
RunConfig load_config(const std::string& path);

/// Applies "a.b.c=value" to a JSON tree. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

const char* to_string(ScanParameter p);

} // namespace tdc::cli

#endif // TDC_CLI_CONFIG_HPP
