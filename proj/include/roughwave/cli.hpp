#ifndef ROUGHWAVE_CLI_HPP
#define ROUGHWAVE_CLI_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "roughwave/advection.hpp"
#include "roughwave/coefficients.hpp"
#include "roughwave/convergence.hpp"
#include "roughwave/grid_ops.hpp"
#include "roughwave/wave.hpp"

// Command-line front end.  Configuration files use a flat, line-oriented
// `key = value` grammar with `[section]` headers and full-line `#` comments;
// lists are space-separated.  Every run writes a manifest (same grammar)
// holding the fully resolved configuration, artifact names and per-snapshot
// diagnostic values, so results are reproducible and re-checkable.
// Exit codes: 0 success, 1 solver/validation failure, 2 configuration error.

namespace roughwave {

// Tolerances used both when recording run diagnostics and when re-checking
// stored snapshots.
inline constexpr double entropy_check_tolerance = 1e-12;   // x data scale
inline constexpr double qer_check_tolerance = 1e-13;       // relative
inline constexpr double energy_check_slack = 1e-12;        // relative
inline constexpr double conservation_check_tolerance = 1e-10;  // x data scale

// ------------------------------------------------------------ ini parsing ---

namespace detail {

inline std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

}  // namespace detail

// Parsed key = value file: sections of unique keys, order-independent.
struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has_section(const std::string& section) const {
    return sections.count(section) != 0;
  }

  std::optional<std::string> find(const std::string& section,
                                  const std::string& key) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return {};
    const auto k = s->second.find(key);
    if (k == s->second.end()) return {};
    return k->second;
  }

  std::string require(const std::string& section, const std::string& key) const {
    const std::optional<std::string> value = find(section, key);
    if (!value) {
      throw ConfigError(section + "." + key + ": missing required key");
    }
    return *value;
  }
};

inline IniFile parse_ini(std::istream& in, const std::string& origin) {
  IniFile file;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header '" + text + "'");
      }
      section = detail::trim(text.substr(1, text.size() - 2));
      file.sections[section];  // register even when empty
      continue;
    }
    const auto equals = text.find('=');
    if (equals == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + text + "'");
    }
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside of any [section]");
    }
    const std::string key = detail::trim(text.substr(0, equals));
    const std::string value = detail::trim(text.substr(equals + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!file.sections[section].emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + section + "." + key + "'");
    }
  }
  return file;
}

inline IniFile parse_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  return parse_ini(in, path);
}

// ------------------------------------------------------- value conversions --

namespace detail {

inline double parse_double_value(const std::string& where,
                                 const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + text + "'");
  }
}

inline std::uint64_t parse_uint_value(const std::string& where,
                                      const std::string& text) {
  try {
    std::size_t used = 0;
    const unsigned long long value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::uint64_t>(value);
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a nonnegative integer: '" + text + "'");
  }
}

inline bool parse_bool_value(const std::string& where,
                             const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string item;
  while (in >> item) items.push_back(item);
  return items;
}

inline std::vector<double> parse_double_list(const std::string& where,
                                             const std::string& text) {
  std::vector<double> values;
  for (const std::string& item : split_list(text)) {
    values.push_back(parse_double_value(where, item));
  }
  return values;
}

inline std::vector<std::size_t> parse_size_list(const std::string& where,
                                                const std::string& text) {
  std::vector<std::size_t> values;
  for (const std::string& item : split_list(text)) {
    values.push_back(
        static_cast<std::size_t>(parse_uint_value(where, item)));
  }
  return values;
}

inline void reject_unknown_keys(const IniFile& ini, const std::string& section,
                                const std::set<std::string>& allowed) {
  const auto s = ini.sections.find(section);
  if (s == ini.sections.end()) return;
  for (const auto& [key, value] : s->second) {
    if (allowed.count(key) == 0) {
      throw ConfigError(section + "." + key + ": unknown key");
    }
  }
}

inline void reject_unknown_sections(const IniFile& ini,
                                    const std::set<std::string>& allowed) {
  for (const auto& [section, keys] : ini.sections) {
    if (allowed.count(section) == 0) {
      throw ConfigError("[" + section + "]: unknown section");
    }
  }
}

}  // namespace detail

// ------------------------------------------------------------ spec parsing --

namespace detail {

inline CoefficientSpec coefficient_spec_from_ini(const IniFile& ini) {
  CoefficientSpec spec;
  const std::string kind = ini.require("coefficient", "kind");
  std::set<std::string> allowed{"kind", "alpha_hint"};
  if (kind == "constant") {
    spec.kind = CoefficientKind::constant;
    allowed.insert("value");
    if (const auto v = ini.find("coefficient", "value")) {
      spec.constant_value = parse_double_value("coefficient.value", *v);
    }
  } else if (kind == "smooth_sine") {
    spec.kind = CoefficientKind::smooth_sine;
    allowed.insert("mean");
    allowed.insert("amplitude");
    if (const auto v = ini.find("coefficient", "mean")) {
      spec.sine_mean = parse_double_value("coefficient.mean", *v);
    }
    if (const auto v = ini.find("coefficient", "amplitude")) {
      spec.sine_amplitude = parse_double_value("coefficient.amplitude", *v);
    }
  } else if (kind == "lognormal") {
    spec.kind = CoefficientKind::lognormal;
    allowed.insert("correlation_length");
    allowed.insert("variance");
    allowed.insert("mean_log");
    if (const auto v = ini.find("coefficient", "correlation_length")) {
      spec.lognormal.correlation_length =
          parse_double_value("coefficient.correlation_length", *v);
    }
    if (const auto v = ini.find("coefficient", "variance")) {
      spec.lognormal.variance = parse_double_value("coefficient.variance", *v);
    }
    if (const auto v = ini.find("coefficient", "mean_log")) {
      spec.lognormal.mean_log = parse_double_value("coefficient.mean_log", *v);
    }
  } else {
    throw ConfigError("coefficient.kind: unknown kind '" + kind + "'");
  }
  if (const auto v = ini.find("coefficient", "alpha_hint")) {
    spec.alpha_hint = parse_double_value("coefficient.alpha_hint", *v);
  }
  reject_unknown_keys(ini, "coefficient", allowed);
  return spec;
}

inline DataSpec data_spec_from_ini(const IniFile& ini) {
  DataSpec spec;
  const std::string kind = ini.require("data", "kind");
  std::set<std::string> allowed{"kind"};
  if (kind == "hat") {
    spec.kind = DataKind::hat;
  } else if (kind == "weierstrass") {
    spec.kind = DataKind::weierstrass;
    allowed.insert("gamma");
    allowed.insert("weierstrass_terms");
    allowed.insert("weierstrass_offset");
    if (const auto v = ini.find("data", "gamma")) {
      spec.gamma = parse_double_value("data.gamma", *v);
    }
    if (const auto v = ini.find("data", "weierstrass_terms")) {
      spec.weierstrass_terms = static_cast<int>(
          parse_uint_value("data.weierstrass_terms", *v));
    }
    if (const auto v = ini.find("data", "weierstrass_offset")) {
      spec.weierstrass_offset =
          parse_double_value("data.weierstrass_offset", *v);
      if (!(*spec.weierstrass_offset > 0.0) ||
          !std::isfinite(*spec.weierstrass_offset)) {
        throw ConfigError("data.weierstrass_offset: must be positive");
      }
    }
  } else if (kind == "smooth_cosine") {
    spec.kind = DataKind::smooth_cosine;
  } else if (kind == "trig_pair") {
    spec.kind = DataKind::trig_pair;
  } else if (kind == "hat_pair") {
    spec.kind = DataKind::hat_pair;
  } else if (kind == "random_hats_pair") {
    spec.kind = DataKind::random_hats_pair;
    allowed.insert("random_hat_count");
    if (const auto v = ini.find("data", "random_hat_count")) {
      spec.random_hat_count = static_cast<int>(
          parse_uint_value("data.random_hat_count", *v));
    }
  } else {
    throw ConfigError("data.kind: unknown kind '" + kind + "'");
  }
  reject_unknown_keys(ini, "data", allowed);
  return spec;
}

inline std::string coefficient_kind_name(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::smooth_sine: return "smooth_sine";
    case CoefficientKind::lognormal: return "lognormal";
  }
  return "unknown";
}

inline std::string data_kind_name(DataKind kind) {
  switch (kind) {
    case DataKind::hat: return "hat";
    case DataKind::weierstrass: return "weierstrass";
    case DataKind::smooth_cosine: return "smooth_cosine";
    case DataKind::trig_pair: return "trig_pair";
    case DataKind::hat_pair: return "hat_pair";
    case DataKind::random_hats_pair: return "random_hats_pair";
  }
  return "unknown";
}

}  // namespace detail

// --------------------------------------------------------------- cli types --

enum class Command { advect, wave, study, coefficient, check };
enum class Profile { full, ci };

struct CliConfig {
  Command command = Command::study;
  std::string config_path;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed_override;
  Profile profile = Profile::full;
};

// Parameters of a single transport or wave run.
struct RunConfig {
  std::size_t resolution = 0;
  double domain_length = 2.0;
  double final_time = 0.0;
  double theta_fraction = 0.4;  // fraction of the stability-limited step
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;  // resolved: sorted, contains 0 and T
  CoefficientSpec coefficient;
  DataSpec data;
};

namespace detail {

inline RunConfig run_config_from_ini(const IniFile& ini, Command command,
                                     const std::optional<std::uint64_t>& seed_override) {
  const bool needs_data = command != Command::coefficient;
  reject_unknown_sections(ini, needs_data
                                   ? std::set<std::string>{"run", "coefficient",
                                                           "data"}
                                   : std::set<std::string>{"run",
                                                           "coefficient"});
  std::set<std::string> run_keys{"resolution", "domain_length", "seed"};
  if (needs_data) {
    run_keys.insert("final_time");
    run_keys.insert("theta_fraction");
    run_keys.insert("safety");
    run_keys.insert("snapshot_times");
  }
  reject_unknown_keys(ini, "run", run_keys);

  RunConfig config;
  config.resolution = static_cast<std::size_t>(
      parse_uint_value("run.resolution", ini.require("run", "resolution")));
  if (config.resolution < 4) {
    throw ConfigError("run.resolution: need at least 4 cells");
  }
  if (const auto v = ini.find("run", "domain_length")) {
    config.domain_length = parse_double_value("run.domain_length", *v);
    if (!(config.domain_length > 0.0) || !std::isfinite(config.domain_length)) {
      throw ConfigError("run.domain_length: must be positive and finite");
    }
  }
  if (const auto v = ini.find("run", "seed")) {
    config.seed = parse_uint_value("run.seed", *v);
  }
  if (seed_override) config.seed = *seed_override;
  config.coefficient = coefficient_spec_from_ini(ini);

  if (needs_data) {
    config.final_time =
        parse_double_value("run.final_time", ini.require("run", "final_time"));
    if (!(config.final_time >= 0.0) || !std::isfinite(config.final_time)) {
      throw ConfigError("run.final_time: must be nonnegative and finite");
    }
    if (ini.find("run", "theta_fraction") && ini.find("run", "safety")) {
      throw ConfigError(
          "run.theta_fraction: give either theta_fraction or safety, not both");
    }
    config.theta_fraction = command == Command::wave ? 1.0 : 0.4;
    if (const auto v = ini.find("run", "theta_fraction")) {
      config.theta_fraction = parse_double_value("run.theta_fraction", *v);
    }
    if (const auto v = ini.find("run", "safety")) {
      config.theta_fraction = parse_double_value("run.safety", *v);
    }
    if (!(config.theta_fraction > 0.0) || !(config.theta_fraction <= 1.0)) {
      throw ConfigError("run.theta_fraction: must lie in (0, 1]");
    }
    if (const auto v = ini.find("run", "snapshot_times")) {
      config.snapshot_times = parse_double_list("run.snapshot_times", *v);
    }
    for (double t : config.snapshot_times) {
      if (!std::isfinite(t) || t < 0.0 || t > config.final_time) {
        throw ConfigError("run.snapshot_times: times must lie in [0, final_time]");
      }
    }
    // The initial and final states are always recorded.
    config.snapshot_times.push_back(0.0);
    config.snapshot_times.push_back(config.final_time);
    std::sort(config.snapshot_times.begin(), config.snapshot_times.end());
    config.snapshot_times.erase(std::unique(config.snapshot_times.begin(),
                                            config.snapshot_times.end()),
                                config.snapshot_times.end());
    config.data = data_spec_from_ini(ini);
    const bool pair = is_pair_data(config.data.kind);
    if (command == Command::advect && pair) {
      throw ConfigError("data.kind: the advect command needs scalar data");
    }
    if (command == Command::wave && !pair) {
      throw ConfigError("data.kind: the wave command needs a (u, v) data pair");
    }
  }
  if (config.coefficient.kind == CoefficientKind::lognormal &&
      !is_power_of_two(config.resolution)) {
    throw ConfigError(
        "run.resolution: must be a power of two for the log-normal "
        "coefficient");
  }
  return config;
}

inline StudyConfig study_config_from_ini(const IniFile& ini, Profile profile,
                                         const std::optional<std::uint64_t>& seed_override) {
  reject_unknown_sections(
      ini, {"study", "coefficient", "data", "expected"});
  reject_unknown_keys(
      ini, "study",
      {"equation", "resolutions", "reference_resolution", "ci_resolutions",
       "ci_reference_resolution", "final_time", "theta_fraction", "safety",
       "seed", "alpha", "norms", "domain_length",
       "use_characteristics_reference"});

  StudyConfig config;
  const std::string equation = ini.require("study", "equation");
  if (equation == "advection") {
    config.equation = Equation::advection;
  } else if (equation == "wave") {
    config.equation = Equation::wave;
  } else {
    throw ConfigError("study.equation: unknown equation '" + equation + "'");
  }

  config.resolutions = parse_size_list(
      "study.resolutions", ini.require("study", "resolutions"));
  config.reference_resolution = static_cast<std::size_t>(parse_uint_value(
      "study.reference_resolution",
      ini.require("study", "reference_resolution")));
  if (profile == Profile::ci) {
    if (const auto v = ini.find("study", "ci_reference_resolution")) {
      config.reference_resolution = static_cast<std::size_t>(
          parse_uint_value("study.ci_reference_resolution", *v));
    } else {
      config.reference_resolution =
          std::min<std::size_t>(config.reference_resolution, 4096);
    }
    if (const auto v = ini.find("study", "ci_resolutions")) {
      config.resolutions = parse_size_list("study.ci_resolutions", *v);
    } else {
      std::vector<std::size_t> kept;
      for (std::size_t r : config.resolutions) {
        if (4 * r <= config.reference_resolution) kept.push_back(r);
      }
      if (kept.empty()) {
        throw ConfigError(
            "study.ci_resolutions: no resolution fits under the ci reference "
            "cap; set ci_resolutions explicitly");
      }
      config.resolutions = std::move(kept);
    }
  }

  if (const auto v = ini.find("study", "final_time")) {
    config.final_time = parse_double_value("study.final_time", *v);
  }
  if (ini.find("study", "theta_fraction") && ini.find("study", "safety")) {
    throw ConfigError(
        "study.theta_fraction: give either theta_fraction or safety, not both");
  }
  config.theta_fraction = config.equation == Equation::wave ? 1.0 : 0.4;
  if (const auto v = ini.find("study", "theta_fraction")) {
    config.theta_fraction = parse_double_value("study.theta_fraction", *v);
  }
  if (const auto v = ini.find("study", "safety")) {
    config.theta_fraction = parse_double_value("study.safety", *v);
  }
  if (const auto v = ini.find("study", "seed")) {
    config.seed = parse_uint_value("study.seed", *v);
  }
  if (seed_override) config.seed = *seed_override;
  if (const auto v = ini.find("study", "alpha")) {
    config.alpha = parse_double_value("study.alpha", *v);
  }
  if (const auto v = ini.find("study", "norms")) {
    config.norms.clear();
    for (double norm : parse_double_list("study.norms", *v)) {
      config.norms.push_back(static_cast<int>(norm));
    }
  }
  if (const auto v = ini.find("study", "domain_length")) {
    config.domain_length = parse_double_value("study.domain_length", *v);
  }
  if (const auto v = ini.find("study", "use_characteristics_reference")) {
    config.use_characteristics_reference =
        parse_bool_value("study.use_characteristics_reference", *v);
  }
  config.coefficient = coefficient_spec_from_ini(ini);
  config.data = data_spec_from_ini(ini);

  if (ini.has_section("expected")) {
    const auto& section = ini.sections.at("expected");
    for (const auto& [key, value] : section) {
      const auto separator = key.rfind("_l");
      if (separator == std::string::npos || separator + 2 >= key.size()) {
        throw ConfigError("expected." + key +
                          ": band keys look like <variable>_l<norm>");
      }
      ExpectedBand band;
      band.variable = key.substr(0, separator);
      band.norm = static_cast<int>(parse_uint_value(
          "expected." + key, key.substr(separator + 2)));
      const std::vector<double> numbers =
          parse_double_list("expected." + key, value);
      if (numbers.size() != 2) {
        throw ConfigError("expected." + key +
                          ": value must be '<target> <tolerance>'");
      }
      band.target = numbers[0];
      band.tolerance = numbers[1];
      config.expected.push_back(band);
    }
  }
  return config;
}

}  // namespace detail

// ----------------------------------------------------------- diagnostics ----

// Per-step diagnostics shared between run-time manifest recording and the
// `check` command.
struct TransportPairDiagnostics {
  bool window_ok = true;        // every cell inside its upwind convex window
  std::size_t window_cell = 0;  // first violating cell if !window_ok
  double entropy_max_p1 = 0.0;
  double entropy_max_p2 = 0.0;
  std::size_t entropy_cell_p1 = 0;
  std::size_t entropy_cell_p2 = 0;
  double entropy_tolerance_p1 = 0.0;
  double entropy_tolerance_p2 = 0.0;
};

inline TransportPairDiagnostics transport_pair_diagnostics(
    const AdvectionState& before, const AdvectionState& after) {
  TransportPairDiagnostics diagnostics;
  const std::size_t n = before.w.values.size();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jm = (j + n - 1) % n;
    const double lo = std::min(before.w.values[j], before.w.values[jm]);
    const double hi = std::max(before.w.values[j], before.w.values[jm]);
    if (!(after.w.values[j] >= lo && after.w.values[j] <= hi)) {
      diagnostics.window_ok = false;
      diagnostics.window_cell = j;
      break;
    }
  }
  double max_abs = 0.0;
  for (double x : before.w.values) max_abs = std::max(max_abs, std::fabs(x));
  for (double x : after.w.values) max_abs = std::max(max_abs, std::fabs(x));
  for (int p : {1, 2}) {
    const GridFunction residual = entropy_residual(before, after, 0.0, p);
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t worst_cell = 0;
    for (std::size_t j = 0; j < residual.values.size(); ++j) {
      if (residual.values[j] > worst) {
        worst = residual.values[j];
        worst_cell = j;
      }
    }
    const double scale = std::pow(1.0 + max_abs, p);
    if (p == 1) {
      diagnostics.entropy_max_p1 = worst;
      diagnostics.entropy_cell_p1 = worst_cell;
      diagnostics.entropy_tolerance_p1 = entropy_check_tolerance * scale;
    } else {
      diagnostics.entropy_max_p2 = worst;
      diagnostics.entropy_cell_p2 = worst_cell;
      diagnostics.entropy_tolerance_p2 = entropy_check_tolerance * scale;
    }
  }
  return diagnostics;
}

struct WavePairDiagnostics {
  double energy_before = 0.0;
  double energy_after = 0.0;
  double qer_lhs = 0.0;
  double qer_rhs = 0.0;
  double residual_max = 0.0;
  std::size_t residual_cell = 0;
  double residual_tolerance = 0.0;
};

inline WavePairDiagnostics wave_pair_diagnostics(const WaveState& before,
                                                 const WaveState& after) {
  WavePairDiagnostics diagnostics;
  diagnostics.energy_before = energy(before, 0.0, 0.0).total_energy;
  diagnostics.energy_after = energy(after, 0.0, 0.0).total_energy;
  const auto [lhs, rhs] = qer_identity_check(before, after);
  diagnostics.qer_lhs = lhs;
  diagnostics.qer_rhs = rhs;

  const GridFunction residual = wave_entropy_residual(before, after, 0.0, 0.0);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_cell = 0;
  for (std::size_t j = 0; j < residual.values.size(); ++j) {
    if (residual.values[j] > worst) {
      worst = residual.values[j];
      worst_cell = j;
    }
  }
  diagnostics.residual_max = worst;
  diagnostics.residual_cell = worst_cell;
  double amplitude = 1.0;
  for (double x : before.u.values) amplitude = std::max(amplitude, 1.0 + std::fabs(x));
  for (double x : before.v.values) amplitude = std::max(amplitude, 1.0 + std::fabs(x));
  for (double x : after.u.values) amplitude = std::max(amplitude, 1.0 + std::fabs(x));
  for (double x : after.v.values) amplitude = std::max(amplitude, 1.0 + std::fabs(x));
  diagnostics.residual_tolerance =
      entropy_check_tolerance * amplitude * amplitude *
      (1.0 + 1.0 / before.coefficient->lower_bound);
  return diagnostics;
}

// ---------------------------------------------------------------- manifest --

namespace detail {

inline void write_key(std::ostream& out, const std::string& key,
                      const std::string& value) {
  out << key << " = " << value << '\n';
}

inline void write_key(std::ostream& out, const std::string& key,
                      double value) {
  write_key(out, key, format_double(value));
}

inline void write_key(std::ostream& out, const std::string& key,
                      std::uint64_t value) {
  write_key(out, key, std::to_string(value));
}

inline void write_coefficient_section(std::ostream& out,
                                      const CoefficientSpec& spec,
                                      const Coefficient& realized) {
  out << "[coefficient]\n";
  write_key(out, "kind", coefficient_kind_name(spec.kind));
  switch (spec.kind) {
    case CoefficientKind::constant:
      write_key(out, "value", spec.constant_value);
      break;
    case CoefficientKind::smooth_sine:
      write_key(out, "mean", spec.sine_mean);
      write_key(out, "amplitude", spec.sine_amplitude);
      break;
    case CoefficientKind::lognormal:
      write_key(out, "correlation_length", spec.lognormal.correlation_length);
      write_key(out, "variance", spec.lognormal.variance);
      write_key(out, "mean_log", spec.lognormal.mean_log);
      break;
  }
  if (spec.alpha_hint) write_key(out, "alpha_hint", *spec.alpha_hint);
  write_key(out, "lower_bound", realized.lower_bound);
  write_key(out, "upper_bound", realized.upper_bound);
  write_key(out, "file", std::string("coefficient.csv"));
}

inline void write_data_section(std::ostream& out, const DataSpec& spec) {
  out << "[data]\n";
  write_key(out, "kind", data_kind_name(spec.kind));
  if (spec.kind == DataKind::weierstrass) {
    write_key(out, "gamma", spec.gamma);
    write_key(out, "weierstrass_terms",
              static_cast<std::uint64_t>(spec.weierstrass_terms));
    write_key(out, "weierstrass_offset",
              spec.weierstrass_offset
                  ? *spec.weierstrass_offset
                  : default_weierstrass_offset(spec.gamma,
                                               spec.weierstrass_terms));
  }
  if (spec.kind == DataKind::random_hats_pair) {
    write_key(out, "random_hat_count",
              static_cast<std::uint64_t>(spec.random_hat_count));
  }
}

inline std::string join_doubles(const std::vector<double>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) joined += ' ';
    joined += format_double(values[i]);
  }
  return joined;
}

inline std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) joined += ' ';
    joined += std::to_string(values[i]);
  }
  return joined;
}

}  // namespace detail

// ------------------------------------------------------------ run commands --

namespace detail {

// Writes manifest + artifacts of a transport run and records per-snapshot
// diagnostics.  Returns true when all recorded diagnostics pass.
inline bool execute_advect(const RunConfig& config,
                           const std::filesystem::path& out_dir,
                           Profile profile) {
  const Grid grid = make_grid(config.domain_length, config.resolution);
  const Coefficient coefficient =
      realize_coefficient(config.coefficient, grid, config.seed);
  const RealizedData data = realize_data(config.data, grid, config.seed);

  const AdvectionTrajectory trajectory =
      solve_advection(data.primary, coefficient, config.final_time,
                      config.theta_fraction, config.snapshot_times);

  write_grid_function_csv((out_dir / "coefficient.csv").string(),
                          coefficient.values, "x,a");
  {
    std::vector<double> steps(trajectory.max_abs_series.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
      steps[i] = static_cast<double>(i);
    }
    write_csv((out_dir / "series.csv").string(), "step,max_abs,conservation",
              {&steps, &trajectory.max_abs_series,
               &trajectory.conservation_series});
  }

  bool all_ok = true;
  std::ofstream manifest(out_dir / "manifest.ini");
  if (!manifest) {
    throw NumericError("cannot write manifest in " + out_dir.string());
  }
  manifest << "[manifest]\n";
  write_key(manifest, "command", std::string("advect"));
  write_key(manifest, "format_version", std::string("1"));
  manifest << "\n[grid]\n";
  write_key(manifest, "domain_length", config.domain_length);
  write_key(manifest, "resolution",
            static_cast<std::uint64_t>(config.resolution));
  manifest << "\n[run]\n";
  write_key(manifest, "final_time", config.final_time);
  write_key(manifest, "theta_fraction", config.theta_fraction);
  write_key(manifest, "seed", config.seed);
  write_key(manifest, "snapshot_times", join_doubles(config.snapshot_times));
  write_key(manifest, "profile",
            std::string(profile == Profile::ci ? "ci" : "full"));
  manifest << '\n';
  write_coefficient_section(manifest, config.coefficient, coefficient);
  manifest << '\n';
  write_data_section(manifest, config.data);
  manifest << "\n[artifacts]\n";
  write_key(manifest, "series_file", std::string("series.csv"));
  write_key(manifest, "num_steps",
            static_cast<std::uint64_t>(trajectory.num_steps));
  write_key(manifest, "base_dt", trajectory.base_dt);
  write_key(manifest, "final_dt", trajectory.final_dt);
  write_key(manifest, "num_snapshots",
            static_cast<std::uint64_t>(trajectory.snapshots.size()));

  for (std::size_t k = 0; k < trajectory.snapshots.size(); ++k) {
    const AdvectionSnapshot& snapshot = trajectory.snapshots[k];
    const std::string state_file = "snapshot_" + std::to_string(k) + ".csv";
    write_grid_function_csv((out_dir / state_file).string(), snapshot.state.w,
                            "x,value");
    manifest << "\n[snapshot_" << k << "]\n";
    write_key(manifest, "requested_time", snapshot.requested_time);
    write_key(manifest, "time", snapshot.state.time);
    write_key(manifest, "dt", snapshot.state.dt);
    write_key(manifest, "file", state_file);
    if (snapshot.predecessor) {
      const std::string predecessor_file =
          "snapshot_" + std::to_string(k) + "_predecessor.csv";
      write_grid_function_csv((out_dir / predecessor_file).string(),
                              snapshot.predecessor->w, "x,value");
      write_key(manifest, "predecessor_file", predecessor_file);
      write_key(manifest, "predecessor_time", snapshot.predecessor->time);
      write_key(manifest, "predecessor_dt", snapshot.predecessor->dt);
      const TransportPairDiagnostics diagnostics =
          transport_pair_diagnostics(*snapshot.predecessor, snapshot.state);
      write_key(manifest, "window_check",
                std::string(diagnostics.window_ok ? "pass" : "fail"));
      write_key(manifest, "entropy_max_p1", diagnostics.entropy_max_p1);
      write_key(manifest, "entropy_max_p2", diagnostics.entropy_max_p2);
      all_ok = all_ok && diagnostics.window_ok &&
               diagnostics.entropy_max_p1 <= diagnostics.entropy_tolerance_p1 &&
               diagnostics.entropy_max_p2 <= diagnostics.entropy_tolerance_p2;
    }
  }
  if (!manifest) {
    throw NumericError("failed writing manifest in " + out_dir.string());
  }
  return all_ok;
}

inline bool execute_wave(const RunConfig& config,
                         const std::filesystem::path& out_dir,
                         Profile profile) {
  const Grid grid = make_grid(config.domain_length, config.resolution);
  const Coefficient coefficient =
      realize_coefficient(config.coefficient, grid, config.seed);
  const RealizedData data = realize_data(config.data, grid, config.seed);

  const WaveTrajectory trajectory =
      solve_wave(data.primary, *data.secondary, coefficient,
                 config.final_time, config.theta_fraction,
                 config.snapshot_times);

  write_grid_function_csv((out_dir / "coefficient.csv").string(),
                          coefficient.values, "x,a");
  {
    std::vector<double> steps(trajectory.energy_series.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
      steps[i] = static_cast<double>(i);
    }
    write_csv((out_dir / "series.csv").string(), "step,energy",
              {&steps, &trajectory.energy_series});
  }

  bool all_ok = true;
  for (std::size_t n = 1; n < trajectory.energy_series.size(); ++n) {
    if (!(trajectory.energy_series[n] <=
          trajectory.energy_series[n - 1] * (1.0 + energy_check_slack) +
              1e-300)) {
      all_ok = false;
    }
  }

  std::ofstream manifest(out_dir / "manifest.ini");
  if (!manifest) {
    throw NumericError("cannot write manifest in " + out_dir.string());
  }
  manifest << "[manifest]\n";
  write_key(manifest, "command", std::string("wave"));
  write_key(manifest, "format_version", std::string("1"));
  manifest << "\n[grid]\n";
  write_key(manifest, "domain_length", config.domain_length);
  write_key(manifest, "resolution",
            static_cast<std::uint64_t>(config.resolution));
  manifest << "\n[run]\n";
  write_key(manifest, "final_time", config.final_time);
  write_key(manifest, "theta_fraction", config.theta_fraction);
  write_key(manifest, "seed", config.seed);
  write_key(manifest, "snapshot_times", join_doubles(config.snapshot_times));
  write_key(manifest, "profile",
            std::string(profile == Profile::ci ? "ci" : "full"));
  manifest << '\n';
  write_coefficient_section(manifest, config.coefficient, coefficient);
  manifest << '\n';
  write_data_section(manifest, config.data);
  manifest << "\n[artifacts]\n";
  write_key(manifest, "series_file", std::string("series.csv"));
  write_key(manifest, "num_steps",
            static_cast<std::uint64_t>(trajectory.num_steps));
  write_key(manifest, "base_dt", trajectory.base_dt);
  write_key(manifest, "final_dt", trajectory.final_dt);
  write_key(manifest, "energy_initial", trajectory.energy_series.front());
  write_key(manifest, "energy_final", trajectory.energy_series.back());
  write_key(manifest, "energy_check",
            std::string(all_ok ? "pass" : "fail"));
  write_key(manifest, "num_snapshots",
            static_cast<std::uint64_t>(trajectory.snapshots.size()));

  for (std::size_t k = 0; k < trajectory.snapshots.size(); ++k) {
    const WaveSnapshot& snapshot = trajectory.snapshots[k];
    const std::string state_file = "snapshot_" + std::to_string(k) + ".csv";
    {
      std::vector<double> xs(grid.num_cells);
      for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = grid.center(j);
      write_csv((out_dir / state_file).string(), "x,u,v,p",
                {&xs, &snapshot.state.u.values, &snapshot.state.v.values,
                 &snapshot.pressure.values});
    }
    manifest << "\n[snapshot_" << k << "]\n";
    write_key(manifest, "requested_time", snapshot.requested_time);
    write_key(manifest, "time", snapshot.state.time);
    write_key(manifest, "dt", snapshot.state.dt);
    write_key(manifest, "file", state_file);
    if (snapshot.predecessor) {
      const std::string predecessor_file =
          "snapshot_" + std::to_string(k) + "_predecessor.csv";
      {
        std::vector<double> xs(grid.num_cells);
        for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = grid.center(j);
        write_csv((out_dir / predecessor_file).string(), "x,u,v",
                  {&xs, &snapshot.predecessor->u.values,
                   &snapshot.predecessor->v.values});
      }
      write_key(manifest, "predecessor_file", predecessor_file);
      write_key(manifest, "predecessor_time", snapshot.predecessor->time);
      write_key(manifest, "predecessor_dt", snapshot.predecessor->dt);
      const WavePairDiagnostics diagnostics =
          wave_pair_diagnostics(*snapshot.predecessor, snapshot.state);
      const bool pair_ok =
          diagnostics.energy_after <=
              diagnostics.energy_before * (1.0 + energy_check_slack) + 1e-300 &&
          std::fabs(diagnostics.qer_lhs - diagnostics.qer_rhs) <=
              qer_check_tolerance *
                  std::max({diagnostics.qer_lhs, diagnostics.qer_rhs, 1e-300}) &&
          diagnostics.residual_max <= diagnostics.residual_tolerance;
      write_key(manifest, "energy_before", diagnostics.energy_before);
      write_key(manifest, "energy_after", diagnostics.energy_after);
      write_key(manifest, "qer_lhs", diagnostics.qer_lhs);
      write_key(manifest, "qer_rhs", diagnostics.qer_rhs);
      write_key(manifest, "residual_max", diagnostics.residual_max);
      write_key(manifest, "pair_check", std::string(pair_ok ? "pass" : "fail"));
      all_ok = all_ok && pair_ok;
    }
  }
  if (!manifest) {
    throw NumericError("failed writing manifest in " + out_dir.string());
  }
  return all_ok;
}

inline void execute_coefficient(const RunConfig& config,
                                const std::filesystem::path& out_dir,
                                Profile profile) {
  const Grid grid = make_grid(config.domain_length, config.resolution);
  int clipped = 0;
  Coefficient coefficient =
      config.coefficient.kind == CoefficientKind::lognormal
          ? [&] {
              LogNormalSpec spec = config.coefficient.lognormal;
              spec.seed = config.seed;
              Coefficient field = lognormal_field(spec, grid, &clipped);
              if (config.coefficient.alpha_hint) {
                field.holder_exponent_hint = config.coefficient.alpha_hint;
              }
              return field;
            }()
          : realize_coefficient(config.coefficient, grid, config.seed);

  write_grid_function_csv((out_dir / "coefficient.csv").string(),
                          coefficient.values, "x,a");
  std::ofstream manifest(out_dir / "manifest.ini");
  if (!manifest) {
    throw NumericError("cannot write manifest in " + out_dir.string());
  }
  manifest << "[manifest]\n";
  write_key(manifest, "command", std::string("coefficient"));
  write_key(manifest, "format_version", std::string("1"));
  manifest << "\n[grid]\n";
  write_key(manifest, "domain_length", config.domain_length);
  write_key(manifest, "resolution",
            static_cast<std::uint64_t>(config.resolution));
  manifest << "\n[run]\n";
  write_key(manifest, "seed", config.seed);
  write_key(manifest, "profile",
            std::string(profile == Profile::ci ? "ci" : "full"));
  manifest << '\n';
  write_coefficient_section(manifest, config.coefficient, coefficient);
  if (config.coefficient.kind == CoefficientKind::lognormal) {
    write_key(manifest, "clipped_modes",
              static_cast<std::uint64_t>(clipped));
  }
  if (!manifest) {
    throw NumericError("failed writing manifest in " + out_dir.string());
  }
}

inline bool execute_study(const IniFile& ini, const CliConfig& cli,
                          const std::filesystem::path& out_dir) {
  const StudyConfig config =
      study_config_from_ini(ini, cli.profile, cli.seed_override);
  const RateReport report = refinement_study(config);

  write_rate_report_csv(report, (out_dir / "rate_report.csv").string());
  std::vector<std::string> loglog_files;
  for (const VariableRates& rates : report.variables) {
    for (int norm : config.norms) {
      const std::string name =
          "loglog_" + rates.variable + "_l" + std::to_string(norm) + ".dat";
      write_loglog_columns(report, rates.variable, norm,
                           (out_dir / name).string());
      loglog_files.push_back(name);
    }
  }

  std::ofstream manifest(out_dir / "manifest.ini");
  if (!manifest) {
    throw NumericError("cannot write manifest in " + out_dir.string());
  }
  manifest << "[manifest]\n";
  write_key(manifest, "command", std::string("study"));
  write_key(manifest, "format_version", std::string("1"));
  manifest << "\n[study]\n";
  write_key(manifest, "equation", std::string(equation_name(config.equation)));
  write_key(manifest, "resolutions", join_sizes(config.resolutions));
  write_key(manifest, "reference_resolution",
            static_cast<std::uint64_t>(config.reference_resolution));
  write_key(manifest, "final_time", config.final_time);
  write_key(manifest, "theta_fraction", config.theta_fraction);
  write_key(manifest, "seed", config.seed);
  write_key(manifest, "alpha", config.alpha);
  write_key(manifest, "gamma", report.gamma);
  write_key(manifest, "domain_length", config.domain_length);
  write_key(manifest, "use_characteristics_reference",
            std::string(config.use_characteristics_reference ? "true"
                                                             : "false"));
  write_key(manifest, "profile",
            std::string(cli.profile == Profile::ci ? "ci" : "full"));
  manifest << '\n';
  const Coefficient preview = realize_coefficient(
      config.coefficient,
      make_grid(config.domain_length, config.reference_resolution),
      config.seed);
  write_coefficient_section(manifest, config.coefficient, preview);
  manifest << '\n';
  write_data_section(manifest, config.data);
  manifest << "\n[results]\n";
  write_key(manifest, "theoretical_rate", report.theoretical_rate);
  for (const VariableRates& rates : report.variables) {
    write_key(manifest, "observed_" + rates.variable + "_l1", rates.rate_l1);
    write_key(manifest, "observed_" + rates.variable + "_l2", rates.rate_l2);
  }
  write_key(manifest, "self_convergence",
            std::string(report.self_convergence ? "true" : "false"));
  write_key(manifest, "invariant_checks",
            std::string(report.invariant_checks_passed ? "pass" : "fail"));
  for (const BandVerdict& verdict : report.band_verdicts) {
    write_key(manifest,
              "band_" + verdict.variable + "_l" + std::to_string(verdict.norm),
              format_double(verdict.observed) + " target " +
                  format_double(verdict.target) + " +- " +
                  format_double(verdict.tolerance) + " " +
                  (verdict.pass ? "pass" : "fail"));
  }
  manifest << "\n[artifacts]\n";
  write_key(manifest, "rate_report", std::string("rate_report.csv"));
  std::string joined;
  for (std::size_t i = 0; i < loglog_files.size(); ++i) {
    if (i > 0) joined += ' ';
    joined += loglog_files[i];
  }
  write_key(manifest, "loglog_files", joined);
  for (std::size_t i = 0; i < report.notes.size(); ++i) {
    write_key(manifest, "note_" + std::to_string(i), report.notes[i]);
  }
  if (!manifest) {
    throw NumericError("failed writing manifest in " + out_dir.string());
  }

  bool bands_ok = true;
  for (const BandVerdict& verdict : report.band_verdicts) {
    bands_ok = bands_ok && verdict.pass;
    std::cout << "band " << verdict.variable << " L" << verdict.norm
              << ": observed " << format_double(verdict.observed)
              << ", target " << format_double(verdict.target) << " +- "
              << format_double(verdict.tolerance) << " -> "
              << (verdict.pass ? "pass" : "fail") << '\n';
  }
  std::cout << "invariant checks: "
            << (report.invariant_checks_passed ? "pass" : "fail") << '\n';
  return report.invariant_checks_passed && bands_ok;
}

}  // namespace detail

// -------------------------------------------------------------- check runs --

namespace detail {

inline GridFunction column_as_grid_function(const Grid& grid,
                                            const CsvData& csv,
                                            std::size_t column,
                                            const std::string& file) {
  if (column >= csv.columns.size() ||
      csv.columns[column].size() != grid.num_cells) {
    throw ConfigError("check: " + file +
                      " does not match the manifest grid layout");
  }
  GridFunction values = make_grid_function(grid);
  values.values = csv.columns[column];
  return values;
}

inline double manifest_double(const IniFile& manifest,
                              const std::string& section,
                              const std::string& key) {
  return parse_double_value(section + "." + key,
                            manifest.require(section, key));
}

// Re-runs the invariant suite on the snapshots stored with a transport run.
inline bool check_transport_manifest(const IniFile& manifest,
                                     const std::filesystem::path& base_dir) {
  const Grid grid = make_grid(
      manifest_double(manifest, "grid", "domain_length"),
      static_cast<std::size_t>(parse_uint_value(
          "grid.resolution", manifest.require("grid", "resolution"))));
  const CsvData coefficient_csv =
      read_csv((base_dir / manifest.require("coefficient", "file")).string());
  const Coefficient coefficient = make_coefficient(
      column_as_grid_function(grid, coefficient_csv, 1, "coefficient.csv"));
  auto shared = std::make_shared<const Coefficient>(coefficient);

  const std::size_t num_snapshots = parse_uint_value(
      "artifacts.num_snapshots", manifest.require("artifacts", "num_snapshots"));
  if (num_snapshots == 0) {
    throw ConfigError("check: manifest lists no snapshots");
  }

  bool all_ok = true;
  std::optional<double> initial_conservation;
  std::optional<double> initial_max_abs;
  double conservation_scale = 1.0;

  for (std::size_t k = 0; k < num_snapshots; ++k) {
    const std::string section = "snapshot_" + std::to_string(k);
    const std::string file = manifest.require(section, "file");
    const CsvData state_csv = read_csv((base_dir / file).string());
    const AdvectionState state = make_advection_state(
        column_as_grid_function(grid, state_csv, 1, file), shared,
        manifest_double(manifest, section, "time"),
        manifest_double(manifest, section, "dt"));

    double max_abs = 0.0;
    for (double x : state.w.values) max_abs = std::max(max_abs, std::fabs(x));
    const double conserved = conservation_sum(state);
    if (!initial_conservation) {
      initial_conservation = conserved;
      initial_max_abs = max_abs;
      std::vector<double> abs_terms(grid.num_cells);
      for (std::size_t j = 0; j < grid.num_cells; ++j) {
        abs_terms[j] = std::fabs(state.w.values[j]) /
                       coefficient.values.values[j];
      }
      conservation_scale = std::max(
          {1.0, std::fabs(conserved), grid.dx * pairwise_sum(abs_terms)});
    } else {
      if (!(max_abs <= *initial_max_abs * (1.0 + 1e-12))) {
        all_ok = false;
        std::cout << section << ": FAIL max principle (max |w| "
                  << format_double(max_abs) << " exceeds initial "
                  << format_double(*initial_max_abs) << ")\n";
      }
      if (!(std::fabs(conserved - *initial_conservation) <=
            conservation_check_tolerance * conservation_scale)) {
        all_ok = false;
        std::cout << section << ": FAIL conservation (total "
                  << format_double(conserved) << " drifted from "
                  << format_double(*initial_conservation) << ")\n";
      }
    }

    if (const auto predecessor_file = manifest.find(section,
                                                    "predecessor_file")) {
      const CsvData predecessor_csv =
          read_csv((base_dir / *predecessor_file).string());
      const AdvectionState predecessor = make_advection_state(
          column_as_grid_function(grid, predecessor_csv, 1, *predecessor_file),
          shared, manifest_double(manifest, section, "predecessor_time"),
          manifest_double(manifest, section, "predecessor_dt"));
      const TransportPairDiagnostics diagnostics =
          transport_pair_diagnostics(predecessor, state);
      if (!diagnostics.window_ok) {
        all_ok = false;
        std::cout << section << ": FAIL max principle at cell "
                  << diagnostics.window_cell << " (value "
                  << format_double(state.w.values[diagnostics.window_cell])
                  << " outside its upwind window)\n";
      }
      if (!(diagnostics.entropy_max_p1 <= diagnostics.entropy_tolerance_p1)) {
        all_ok = false;
        std::cout << section << ": FAIL entropy residual (p=1) at cell "
                  << diagnostics.entropy_cell_p1 << " (residual "
                  << format_double(diagnostics.entropy_max_p1) << ")\n";
      }
      if (!(diagnostics.entropy_max_p2 <= diagnostics.entropy_tolerance_p2)) {
        all_ok = false;
        std::cout << section << ": FAIL entropy residual (p=2) at cell "
                  << diagnostics.entropy_cell_p2 << " (residual "
                  << format_double(diagnostics.entropy_max_p2) << ")\n";
      }
    }
  }
  return all_ok;
}

inline bool check_wave_manifest(const IniFile& manifest,
                                const std::filesystem::path& base_dir) {
  const Grid grid = make_grid(
      manifest_double(manifest, "grid", "domain_length"),
      static_cast<std::size_t>(parse_uint_value(
          "grid.resolution", manifest.require("grid", "resolution"))));
  const CsvData coefficient_csv =
      read_csv((base_dir / manifest.require("coefficient", "file")).string());
  const Coefficient coefficient = make_coefficient(
      column_as_grid_function(grid, coefficient_csv, 1, "coefficient.csv"));
  auto shared = std::make_shared<const Coefficient>(coefficient);

  const std::size_t num_snapshots = parse_uint_value(
      "artifacts.num_snapshots", manifest.require("artifacts", "num_snapshots"));
  if (num_snapshots == 0) {
    throw ConfigError("check: manifest lists no snapshots");
  }

  bool all_ok = true;
  std::optional<double> previous_energy;
  for (std::size_t k = 0; k < num_snapshots; ++k) {
    const std::string section = "snapshot_" + std::to_string(k);
    const std::string file = manifest.require(section, "file");
    const CsvData state_csv = read_csv((base_dir / file).string());
    const WaveState state = make_wave_state(
        column_as_grid_function(grid, state_csv, 1, file),
        column_as_grid_function(grid, state_csv, 2, file), shared,
        manifest_double(manifest, section, "time"),
        manifest_double(manifest, section, "dt"));

    const double snapshot_energy = energy(state, 0.0, 0.0).total_energy;
    if (previous_energy &&
        !(snapshot_energy <=
          *previous_energy * (1.0 + energy_check_slack) + 1e-300)) {
      all_ok = false;
      std::cout << section << ": FAIL energy monotonicity ("
                << format_double(snapshot_energy) << " after "
                << format_double(*previous_energy) << ")\n";
    }
    previous_energy = snapshot_energy;

    if (const auto predecessor_file = manifest.find(section,
                                                    "predecessor_file")) {
      const CsvData predecessor_csv =
          read_csv((base_dir / *predecessor_file).string());
      const WaveState predecessor = make_wave_state(
          column_as_grid_function(grid, predecessor_csv, 1, *predecessor_file),
          column_as_grid_function(grid, predecessor_csv, 2, *predecessor_file),
          shared, manifest_double(manifest, section, "predecessor_time"),
          manifest_double(manifest, section, "predecessor_dt"));
      const WavePairDiagnostics diagnostics =
          wave_pair_diagnostics(predecessor, state);
      if (!(diagnostics.energy_after <=
            diagnostics.energy_before * (1.0 + energy_check_slack) + 1e-300)) {
        all_ok = false;
        std::cout << section << ": FAIL step energy ("
                  << format_double(diagnostics.energy_after) << " after "
                  << format_double(diagnostics.energy_before) << ")\n";
      }
      if (!(std::fabs(diagnostics.qer_lhs - diagnostics.qer_rhs) <=
            qer_check_tolerance *
                std::max({diagnostics.qer_lhs, diagnostics.qer_rhs,
                          1e-300}))) {
        all_ok = false;
        std::cout << section << ": FAIL quotient identity (lhs "
                  << format_double(diagnostics.qer_lhs) << ", rhs "
                  << format_double(diagnostics.qer_rhs) << ")\n";
      }
      if (!(diagnostics.residual_max <= diagnostics.residual_tolerance)) {
        all_ok = false;
        std::cout << section << ": FAIL entropy residual at cell "
                  << diagnostics.residual_cell << " (residual "
                  << format_double(diagnostics.residual_max) << ")\n";
      }
    }
  }
  return all_ok;
}

inline bool execute_check(const CliConfig& cli) {
  const std::filesystem::path manifest_path(cli.config_path);
  if (!std::filesystem::exists(manifest_path)) {
    throw ConfigError("check: manifest not found: " + cli.config_path);
  }
  const IniFile manifest = parse_ini_file(manifest_path.string());
  const std::string command = manifest.require("manifest", "command");
  const std::filesystem::path base_dir = manifest_path.parent_path();
  bool ok = false;
  if (command == "advect") {
    ok = check_transport_manifest(manifest, base_dir);
  } else if (command == "wave") {
    ok = check_wave_manifest(manifest, base_dir);
  } else {
    throw ConfigError("check: manifests from '" + command +
                      "' runs carry no snapshot checks");
  }
  std::cout << (ok ? "all checks passed" : "checks FAILED") << '\n';
  return ok;
}

}  // namespace detail

// ------------------------------------------------------------------- entry --

// Dispatches a parsed command line.  Exit codes: 0 success, 1 when the solver
// or an invariant check fails, 2 for configuration problems (bad config file,
// missing inputs, malformed manifests).
inline int run(const CliConfig& cli) {
  try {
    if (cli.command == Command::check) {
      return detail::execute_check(cli) ? 0 : 1;
    }

    const IniFile ini = parse_ini_file(cli.config_path);
    const std::filesystem::path out_dir(cli.output_dir);
    std::filesystem::create_directories(out_dir);

    switch (cli.command) {
      case Command::advect: {
        const RunConfig config = detail::run_config_from_ini(
            ini, Command::advect, cli.seed_override);
        return detail::execute_advect(config, out_dir, cli.profile) ? 0 : 1;
      }
      case Command::wave: {
        const RunConfig config = detail::run_config_from_ini(
            ini, Command::wave, cli.seed_override);
        return detail::execute_wave(config, out_dir, cli.profile) ? 0 : 1;
      }
      case Command::coefficient: {
        const RunConfig config = detail::run_config_from_ini(
            ini, Command::coefficient, cli.seed_override);
        detail::execute_coefficient(config, out_dir, cli.profile);
        return 0;
      }
      case Command::study:
        return detail::execute_study(ini, cli, out_dir) ? 0 : 1;
      case Command::check:
        break;  // handled above
    }
    return 0;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
}

}  // namespace roughwave

#endif  // ROUGHWAVE_CLI_HPP
