#include "tdc/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "tdc/cli/output.hpp"

namespace tdc::cli {

using nlohmann::json;

namespace {

json complex_to_json(Complex z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

Complex complex_from_json(const json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError(key + ": expected a number or [re, im]");
}

json optional_time(const std::optional<double>& t) {
  return t ? json(*t) : json("never");
}

std::optional<double> optional_time_from(const json& j, const std::string& key) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "never")) return std::nullopt;
  if (j.is_number()) return j.get<double>();
  throw ConfigError(key + ": expected a time, null or \"never\"");
}

// Object section with key checking. Reads return the default when absent.
class Section {
public:
  Section(const json& j, std::string name, std::set<std::string> keys)
      : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    for (const auto& [k, v] : j_.items())
      if (!keys.count(k)) throw ConfigError(name_ + ": unknown key '" + k + "'");
  }

  bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json& at(const char* k) const { return j_.at(k); }
  std::string path(const char* k) const { return name_ + "." + k; }

  template <typename T> void read(const char* k, T& out) const {
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(k) + ": wrong type");
    }
  }
  void read_complex(const char* k, Complex& out) const {
    if (j_.contains(k)) out = complex_from_json(j_.at(k), path(k));
  }

private:
  const json& j_;
  std::string name_;
};

ScanParameter scan_parameter_from(const std::string& s) {
  if (s == "epsilon_b") return ScanParameter::epsilon_b;
  if (s == "epsilon_a") return ScanParameter::epsilon_a;
  if (s == "initial_amplitude") return ScanParameter::initial_amplitude;
  throw ConfigError("scan.parameter: must be epsilon_b, epsilon_a or initial_amplitude");
}

JumpConvention convention_from(const std::string& s) {
  if (s == "sde") return JumpConvention::sde;
  if (s == "literal") return JumpConvention::literal;
  throw ConfigError("mcwf.convention: must be sde or literal");
}

json system_to_json(const SystemParams& p) {
  return {{"kappa", p.kappa},
          {"gamma_a", p.gamma_a},
          {"gamma_b", p.gamma_b},
          {"epsilon_b", complex_to_json(p.epsilon_b)}};
}

SystemParams system_from_json(const json& j, const std::string& name) {
  SystemParams p;
  Section s(j, name, {"kappa", "gamma_a", "gamma_b", "epsilon_b"});
  s.read("kappa", p.kappa);
  s.read("gamma_a", p.gamma_a);
  s.read("gamma_b", p.gamma_b);
  s.read_complex("epsilon_b", p.epsilon_b);
  return p;
}

template <typename Fn> void as_config_error(const char* what, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

} // namespace

const char* to_string(ScanParameter p) {
  switch (p) {
  case ScanParameter::epsilon_b: return "epsilon_b";
  case ScanParameter::epsilon_a: return "epsilon_a";
  case ScanParameter::initial_amplitude: return "initial_amplitude";
  }
  return "?";
}

std::vector<double> ScanSpec::values() const {
  std::vector<double> v;
  if (steps == 1) return {start};
  v.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    v.push_back(i == steps - 1 ? stop : start + (stop - start) * i / (steps - 1));
  return v;
}

void RunConfig::validate() const {
  as_config_error("system", [&] { system.validate(); });
  as_config_error("drive", [&] { drive.validate(); });
  as_config_error("ensemble", [&] { ensemble.validate(); });
  if (!initial.finite()) throw ConfigError("initial: non-finite amplitude");
  if (!(spectrum.omega_max > 0.0) || spectrum.n_points < 2)
    throw ConfigError("spectrum: need omega_max > 0 and n_points >= 2");
  if (!(spectrum.ratio_threshold > 0.0))
    throw ConfigError("spectrum.ratio_threshold must be positive");
  if (mcwf) {
    as_config_error("mcwf", [&] { mcwf->fock.validate(); });
    if (mcwf->system) as_config_error("mcwf.system", [&] { mcwf->system->validate(); });
    if (mcwf->t_final && !(*mcwf->t_final > 0.0))
      throw ConfigError("mcwf.t_final must be positive");
  }
  if (scan) {
    if (scan->steps < 1) throw ConfigError("scan.steps must be at least 1");
    if (!std::isfinite(scan->start) || !std::isfinite(scan->stop))
      throw ConfigError("scan: non-finite range");
  }
  if (output.empty()) throw ConfigError("output: empty path");
}

std::uint64_t RunConfig::resolved_seed() const {
  if (seed) return *seed;
  // Neither the thread count nor the output location changes the physics.
  json j = to_json(*this);
  j["ensemble"]["seed"] = nullptr;
  j["ensemble"]["threads"] = 0;
  j["output"] = "";
  if (j.contains("mcwf") && j["mcwf"].is_object()) j["mcwf"]["threads"] = 0;
  const std::string hex = sha256_hex(j.dump());
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

EnsembleConfig RunConfig::ensemble_config() const {
  EnsembleConfig e = ensemble;
  e.master_seed = resolved_seed();
  return e;
}

json to_json(const RunConfig& c) {
  json j;
  j["system"] = system_to_json(c.system);
  j["drive"] = {{"epsilon_a", complex_to_json(c.drive.epsilon_a)},
                {"t_off", optional_time(c.drive.t_off)}};
  j["initial"] = {{"alpha", complex_to_json(c.initial.alpha)},
                  {"alpha_plus", complex_to_json(c.initial.alpha_plus)},
                  {"beta", complex_to_json(c.initial.beta)},
                  {"beta_plus", complex_to_json(c.initial.beta_plus)}};
  const auto& e = c.ensemble;
  j["ensemble"] = {{"n_traj", e.n_traj},
                   {"t_final", e.t_final},
                   {"dt", e.dt},
                   {"sample_stride", e.sample_stride},
                   {"seed", c.seed ? json(*c.seed) : json(nullptr)},
                   {"divergence_bound", e.divergence_bound},
                   {"threads", e.threads}};
  j["spectrum"] = {{"omega_max", c.spectrum.omega_max},
                   {"n_points", c.spectrum.n_points},
                   {"ratio_threshold", c.spectrum.ratio_threshold},
                   {"fluctuation_check", c.spectrum.fluctuation_check}};
  if (c.mcwf) {
    const auto& f = c.mcwf->fock;
    j["mcwf"] = {{"N_a", f.N_a},
                 {"N_b", f.N_b},
                 {"dt", f.dt},
                 {"n_traj", f.n_traj},
                 {"sample_stride", f.sample_stride},
                 {"convention", f.convention == JumpConvention::sde ? "sde" : "literal"},
                 {"threads", f.threads},
                 {"t_final", c.mcwf->t_final ? json(*c.mcwf->t_final) : json(nullptr)},
                 {"system", c.mcwf->system ? system_to_json(*c.mcwf->system) : json(nullptr)}};
  } else {
    j["mcwf"] = nullptr;
  }
  if (c.scan)
    j["scan"] = {{"parameter", to_string(c.scan->parameter)},
                 {"start", c.scan->start},
                 {"stop", c.scan->stop},
                 {"steps", c.scan->steps}};
  else
    j["scan"] = nullptr;
  const auto& g = c.kappa.geometry;
  j["kappa"] = {{"chi3", g.chi3},
                {"omega_a", g.omega_a},
                {"eps_a", g.eps_a},
                {"eps_b", g.eps_b},
                {"length", g.length},
                {"sigma", g.sigma},
                {"m_a", g.m_a},
                {"m_b", g.m_b},
                {"profile_file", c.kappa.profile_file ? json(*c.kappa.profile_file) : json(nullptr)},
                {"gamma_a_si", c.kappa.gamma_a_si ? json(*c.kappa.gamma_a_si) : json(nullptr)}};
  j["output"] = c.output;
  j["semiclassical_trace"] = c.semiclassical_trace;
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section top(j, "config",
              {"system", "drive", "initial", "ensemble", "spectrum", "mcwf", "scan", "kappa",
               "output", "semiclassical_trace"});

  if (top.has("system")) c.system = system_from_json(top.at("system"), "system");

  if (top.has("drive")) {
    Section s(top.at("drive"), "drive", {"epsilon_a", "t_off"});
    s.read_complex("epsilon_a", c.drive.epsilon_a);
    if (top.at("drive").contains("t_off"))
      c.drive.t_off = optional_time_from(s.at("t_off"), "drive.t_off");
  }

  if (top.has("initial")) {
    Section s(top.at("initial"), "initial", {"alpha", "alpha_plus", "beta", "beta_plus"});
    s.read_complex("alpha", c.initial.alpha);
    s.read_complex("beta", c.initial.beta);
    // conjugate partners default to the coherent slice
    c.initial.alpha_plus = std::conj(c.initial.alpha);
    c.initial.beta_plus = std::conj(c.initial.beta);
    s.read_complex("alpha_plus", c.initial.alpha_plus);
    s.read_complex("beta_plus", c.initial.beta_plus);
  }

  if (top.has("ensemble")) {
    Section s(top.at("ensemble"), "ensemble",
              {"n_traj", "t_final", "dt", "sample_stride", "seed", "divergence_bound", "threads"});
    s.read("n_traj", c.ensemble.n_traj);
    s.read("t_final", c.ensemble.t_final);
    s.read("dt", c.ensemble.dt);
    s.read("sample_stride", c.ensemble.sample_stride);
    s.read("divergence_bound", c.ensemble.divergence_bound);
    s.read("threads", c.ensemble.threads);
    if (s.has("seed")) {
      std::uint64_t seed = 0;
      s.read("seed", seed);
      c.seed = seed;
    }
  }

  if (top.has("spectrum")) {
    Section s(top.at("spectrum"), "spectrum",
              {"omega_max", "n_points", "ratio_threshold", "fluctuation_check"});
    s.read("omega_max", c.spectrum.omega_max);
    s.read("n_points", c.spectrum.n_points);
    s.read("ratio_threshold", c.spectrum.ratio_threshold);
    s.read("fluctuation_check", c.spectrum.fluctuation_check);
  }

  if (top.has("mcwf")) {
    Section s(top.at("mcwf"), "mcwf",
              {"N_a", "N_b", "dt", "n_traj", "sample_stride", "convention", "threads", "t_final",
               "system"});
    McwfSettings m;
    s.read("N_a", m.fock.N_a);
    s.read("N_b", m.fock.N_b);
    s.read("dt", m.fock.dt);
    s.read("n_traj", m.fock.n_traj);
    s.read("sample_stride", m.fock.sample_stride);
    s.read("threads", m.fock.threads);
    if (s.has("convention")) {
      std::string conv;
      s.read("convention", conv);
      m.fock.convention = convention_from(conv);
    }
    if (s.has("t_final")) {
      double t = 0.0;
      s.read("t_final", t);
      m.t_final = t;
    }
    if (s.has("system")) m.system = system_from_json(s.at("system"), "mcwf.system");
    c.mcwf = m;
  }

  if (top.has("scan")) {
    Section s(top.at("scan"), "scan", {"parameter", "start", "stop", "steps"});
    ScanSpec sc;
    std::string name = "epsilon_b";
    s.read("parameter", name);
    sc.parameter = scan_parameter_from(name);
    s.read("start", sc.start);
    sc.stop = sc.start;
    s.read("stop", sc.stop);
    s.read("steps", sc.steps);
    c.scan = sc;
  }

  if (top.has("kappa")) {
    Section s(top.at("kappa"), "kappa",
              {"chi3", "omega_a", "eps_a", "eps_b", "length", "sigma", "m_a", "m_b",
               "profile_file", "gamma_a_si"});
    auto& g = c.kappa.geometry;
    s.read("chi3", g.chi3);
    s.read("omega_a", g.omega_a);
    s.read("eps_a", g.eps_a);
    s.read("eps_b", g.eps_b);
    s.read("length", g.length);
    s.read("sigma", g.sigma);
    s.read("m_a", g.m_a);
    s.read("m_b", g.m_b);
    if (s.has("profile_file")) {
      std::string f;
      s.read("profile_file", f);
      c.kappa.profile_file = f;
    } else if (top.at("kappa").contains("profile_file")) {
      c.kappa.profile_file.reset();
    }
    if (s.has("gamma_a_si")) {
      double g_si = 0.0;
      s.read("gamma_a_si", g_si);
      c.kappa.gamma_a_si = g_si;
    } else if (top.at("kappa").contains("gamma_a_si")) {
      c.kappa.gamma_a_si.reset();
    }
  }

  top.read("output", c.output);
  top.read("semiclassical_trace", c.semiclassical_trace);
  return c;
}

json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig load_config(const std::string& path) { return from_json(load_config_json(path)); }

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }

  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a value");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

} // namespace tdc::cli
