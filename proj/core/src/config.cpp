// SPDX-License-Identifier: Apache-2.0

#include "simstack/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "simstack/errors.hpp"

namespace simstack {

namespace {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])))
    ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1])))
    --end;
  return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  std::stringstream stream(value);
  while (std::getline(stream, current, ',')) items.push_back(trim(current));
  return items;
}

double parse_double(const std::string& path, const std::string& value) {
  if (value.empty()) throw ConfigError(path, "empty numeric value");
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size())
    throw ConfigError(path, "not a number: '" + value + "'");
  if (!std::isfinite(parsed))
    throw ConfigError(path, "value must be finite");
  return parsed;
}

long long parse_integer(const std::string& path, const std::string& value) {
  if (value.empty()) throw ConfigError(path, "empty integer value");
  char* end = nullptr;
  const long long parsed = std::strtoll(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size())
    throw ConfigError(path, "not an integer: '" + value + "'");
  return parsed;
}

std::uint64_t parse_u64(const std::string& path, const std::string& value) {
  if (value.empty() || value[0] == '-')
    throw ConfigError(path, "expected an unsigned integer");
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size())
    throw ConfigError(path, "not an unsigned integer: '" + value + "'");
  return parsed;
}

std::vector<double> parse_double_list(const std::string& path,
                                      const std::string& value) {
  std::vector<double> values;
  for (const auto& item : split_list(value))
    values.push_back(parse_double(path, item));
  return values;
}

struct RawConfig {
  // section -> key -> value, with seen-tracking for required checks.
  std::map<std::string, std::map<std::string, std::string>> sections;
};

const std::set<std::string> kKnownSections = {"scenario", "schemes", "sweep",
                                              "optimizer", "seeds"};

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"scenario",
     {"carrier_hz", "tx_power_dbm", "noise_dbm", "pathloss_exponent",
      "link_distance_m", "num_streams_or_users", "attenuation_ratio",
      "user_azimuth_deg", "user_elevation_deg"}},
    {"schemes", {"enabled"}},
    {"sweep",
     {"variable", "start", "stop", "step", "realizations", "ber_min_errors",
      "ber_max_symbols"}},
    {"optimizer", {"step_size", "max_iters", "tolerance", "restarts"}},
    {"seeds", {"master_seed"}},
};

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::string current_section;
  std::istringstream stream(text);
  std::string line;
  int line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']')
        throw ConfigError("line " + std::to_string(line_number),
                          "malformed section header");
      current_section = trim(trimmed.substr(1, trimmed.size() - 2));
      if (kKnownSections.count(current_section) == 0)
        throw ConfigError(current_section, "unknown section");
      raw.sections[current_section];  // mark as present
      continue;
    }
    const std::size_t equals = trimmed.find('=');
    if (equals == std::string::npos)
      throw ConfigError("line " + std::to_string(line_number),
                        "expected 'key = value'");
    if (current_section.empty())
      throw ConfigError("line " + std::to_string(line_number),
                        "key outside of any section");
    const std::string key = trim(trimmed.substr(0, equals));
    const std::string value = trim(trimmed.substr(equals + 1));
    const std::string path = current_section + "." + key;
    if (kKnownKeys.at(current_section).count(key) == 0)
      throw ConfigError(path, "unknown key");
    auto& section = raw.sections[current_section];
    if (!section.emplace(key, value).second)
      throw ConfigError(path, "duplicate key");
  }
  return raw;
}

class RawReader {
 public:
  explicit RawReader(const RawConfig& raw) : raw_(raw) {}

  const std::string& require(const std::string& section,
                             const std::string& key) const {
    const auto section_it = raw_.sections.find(section);
    if (section_it == raw_.sections.end())
      throw ConfigError(section, "missing required section");
    const auto key_it = section_it->second.find(key);
    if (key_it == section_it->second.end())
      throw ConfigError(section + "." + key, "missing required key");
    return key_it->second;
  }

  const std::string* find(const std::string& section,
                          const std::string& key) const {
    const auto section_it = raw_.sections.find(section);
    if (section_it == raw_.sections.end()) return nullptr;
    const auto key_it = section_it->second.find(key);
    return key_it == section_it->second.end() ? nullptr : &key_it->second;
  }

 private:
  const RawConfig& raw_;
};

}  // namespace

std::string_view scheme_name(SchemeId scheme) {
  switch (scheme) {
    case SchemeId::kMimoDigital: return "MIMO_DIGITAL";
    case SchemeId::kSim1L: return "SIM_1L";
    case SchemeId::kSim4L: return "SIM_4L";
    case SchemeId::kSim7L: return "SIM_7L";
    case SchemeId::kMfsim2L: return "MFSIM_2L";
    case SchemeId::kFilm2L: return "FILM_2L";
  }
  return "UNKNOWN";
}

std::optional<SchemeId> parse_scheme(std::string_view name) {
  for (SchemeId scheme : kAllSchemes)
    if (scheme_name(scheme) == name) return scheme;
  return std::nullopt;
}

std::string_view sweep_variable_name(SweepVariable variable) {
  return variable == SweepVariable::kAttenuationRatio ? "attenuation_ratio"
                                                      : "tx_power_dbm";
}

std::vector<double> SweepSpec::values() const {
  const int count =
      static_cast<int>(std::llround((stop - start) / step)) + 1;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = start + i * step;
  return grid;
}

void ExperimentConfig::validate() const {
  try {
    scenario.validate();
  } catch (const std::exception& error) {
    throw ConfigError("scenario", error.what());
  }
  if (schemes.empty())
    throw ConfigError("schemes.enabled", "at least one scheme required");
  std::set<SchemeId> seen;
  for (SchemeId scheme : schemes)
    if (!seen.insert(scheme).second)
      throw ConfigError("schemes.enabled",
                        std::string("duplicate scheme ") +
                            std::string(scheme_name(scheme)));

  if (!(sweep.step > 0.0))
    throw ConfigError("sweep.step", "must be > 0");
  if (sweep.stop < sweep.start)
    throw ConfigError("sweep.stop", "must be >= sweep.start");
  if (sweep.realizations < 1)
    throw ConfigError("sweep.realizations", "must be >= 1");

  const bool power_sweep = sweep.variable == SweepVariable::kTxPowerDbm;
  if (!power_sweep) {
    if (sweep.start < -1e-12 || sweep.stop > 0.4 + 1e-9)
      throw ConfigError("sweep.start",
                        "attenuation sweeps must stay within [0, 0.4]");
    if (!user_azimuth_deg.empty() || !user_elevation_deg.empty())
      throw ConfigError("scenario.user_azimuth_deg",
                        "user directions apply to tx_power_dbm sweeps only");
  } else {
    const auto users = static_cast<std::size_t>(scenario.num_streams_or_users);
    if (user_azimuth_deg.size() != users)
      throw ConfigError("scenario.user_azimuth_deg",
                        "need one azimuth per user");
    if (user_elevation_deg.size() != users)
      throw ConfigError("scenario.user_elevation_deg",
                        "need one elevation per user");
    if (sweep.ber_min_errors < 1)
      throw ConfigError("sweep.ber_min_errors", "must be >= 1");
    if (sweep.ber_max_symbols < 1)
      throw ConfigError("sweep.ber_max_symbols", "must be >= 1");
  }

  if (!(optimizer.step_size > 0.0))
    throw ConfigError("optimizer.step_size", "must be > 0");
  if (optimizer.max_iters < 1)
    throw ConfigError("optimizer.max_iters", "must be >= 1");
  if (!(optimizer.tolerance >= 0.0))
    throw ConfigError("optimizer.tolerance", "must be >= 0");
  if (optimizer.restarts < 1)
    throw ConfigError("optimizer.restarts", "must be >= 1");
}

ExperimentConfig parse_config_text(const std::string& text) {
  const RawConfig raw = tokenize(text);
  const RawReader reader(raw);
  ExperimentConfig config;

  config.scenario.carrier_hz =
      parse_double("scenario.carrier_hz", reader.require("scenario", "carrier_hz"));
  config.scenario.tx_power_dbm = parse_double(
      "scenario.tx_power_dbm", reader.require("scenario", "tx_power_dbm"));
  config.scenario.noise_dbm =
      parse_double("scenario.noise_dbm", reader.require("scenario", "noise_dbm"));
  config.scenario.pathloss_exponent =
      parse_double("scenario.pathloss_exponent",
                   reader.require("scenario", "pathloss_exponent"));
  config.scenario.link_distance_m =
      parse_double("scenario.link_distance_m",
                   reader.require("scenario", "link_distance_m"));
  config.scenario.num_streams_or_users = static_cast<int>(
      parse_integer("scenario.num_streams_or_users",
                    reader.require("scenario", "num_streams_or_users")));
  config.scenario.attenuation_ratio =
      parse_double("scenario.attenuation_ratio",
                   reader.require("scenario", "attenuation_ratio"));
  if (const std::string* azimuths = reader.find("scenario", "user_azimuth_deg"))
    config.user_azimuth_deg =
        parse_double_list("scenario.user_azimuth_deg", *azimuths);
  if (const std::string* elevations =
          reader.find("scenario", "user_elevation_deg"))
    config.user_elevation_deg =
        parse_double_list("scenario.user_elevation_deg", *elevations);

  for (const auto& item :
       split_list(reader.require("schemes", "enabled"))) {
    const auto scheme = parse_scheme(item);
    if (!scheme)
      throw ConfigError("schemes.enabled", "unknown scheme '" + item + "'");
    config.schemes.push_back(*scheme);
  }

  const std::string& variable = reader.require("sweep", "variable");
  if (variable == "attenuation_ratio")
    config.sweep.variable = SweepVariable::kAttenuationRatio;
  else if (variable == "tx_power_dbm")
    config.sweep.variable = SweepVariable::kTxPowerDbm;
  else
    throw ConfigError("sweep.variable",
                      "must be attenuation_ratio or tx_power_dbm");
  config.sweep.start = parse_double("sweep.start", reader.require("sweep", "start"));
  config.sweep.stop = parse_double("sweep.stop", reader.require("sweep", "stop"));
  config.sweep.step = parse_double("sweep.step", reader.require("sweep", "step"));
  config.sweep.realizations = static_cast<int>(parse_integer(
      "sweep.realizations", reader.require("sweep", "realizations")));
  const bool power_sweep = config.sweep.variable == SweepVariable::kTxPowerDbm;
  if (const std::string* value = reader.find("sweep", "ber_min_errors")) {
    if (!power_sweep)
      throw ConfigError("sweep.ber_min_errors",
                        "only valid when variable = tx_power_dbm");
    config.sweep.ber_min_errors = parse_integer("sweep.ber_min_errors", *value);
  }
  if (const std::string* value = reader.find("sweep", "ber_max_symbols")) {
    if (!power_sweep)
      throw ConfigError("sweep.ber_max_symbols",
                        "only valid when variable = tx_power_dbm");
    config.sweep.ber_max_symbols =
        parse_integer("sweep.ber_max_symbols", *value);
  }

  if (const std::string* value = reader.find("optimizer", "step_size"))
    config.optimizer.step_size = parse_double("optimizer.step_size", *value);
  if (const std::string* value = reader.find("optimizer", "max_iters"))
    config.optimizer.max_iters =
        static_cast<int>(parse_integer("optimizer.max_iters", *value));
  if (const std::string* value = reader.find("optimizer", "tolerance"))
    config.optimizer.tolerance = parse_double("optimizer.tolerance", *value);
  if (const std::string* value = reader.find("optimizer", "restarts"))
    config.optimizer.restarts =
        static_cast<int>(parse_integer("optimizer.restarts", *value));

  config.master_seed =
      parse_u64("seeds.master_seed", reader.require("seeds", "master_seed"));

  config.validate();
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream)
    throw ConfigError("config", "cannot open file '" + path + "'");
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return parse_config_text(buffer.str());
}

std::string canonical_config_text(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "[scenario]\n";
  out << "carrier_hz = " << format_double(config.scenario.carrier_hz) << "\n";
  out << "tx_power_dbm = " << format_double(config.scenario.tx_power_dbm) << "\n";
  out << "noise_dbm = " << format_double(config.scenario.noise_dbm) << "\n";
  out << "pathloss_exponent = "
      << format_double(config.scenario.pathloss_exponent) << "\n";
  out << "link_distance_m = " << format_double(config.scenario.link_distance_m)
      << "\n";
  out << "num_streams_or_users = " << config.scenario.num_streams_or_users
      << "\n";
  out << "attenuation_ratio = "
      << format_double(config.scenario.attenuation_ratio) << "\n";
  const bool power_sweep = config.sweep.variable == SweepVariable::kTxPowerDbm;
  if (power_sweep) {
    out << "user_azimuth_deg = ";
    for (std::size_t i = 0; i < config.user_azimuth_deg.size(); ++i)
      out << (i ? ", " : "") << format_double(config.user_azimuth_deg[i]);
    out << "\n";
    out << "user_elevation_deg = ";
    for (std::size_t i = 0; i < config.user_elevation_deg.size(); ++i)
      out << (i ? ", " : "") << format_double(config.user_elevation_deg[i]);
    out << "\n";
  }

  out << "\n[schemes]\n";
  out << "enabled = ";
  for (std::size_t i = 0; i < config.schemes.size(); ++i)
    out << (i ? ", " : "") << scheme_name(config.schemes[i]);
  out << "\n";

  out << "\n[sweep]\n";
  out << "variable = " << sweep_variable_name(config.sweep.variable) << "\n";
  out << "start = " << format_double(config.sweep.start) << "\n";
  out << "stop = " << format_double(config.sweep.stop) << "\n";
  out << "step = " << format_double(config.sweep.step) << "\n";
  out << "realizations = " << config.sweep.realizations << "\n";
  if (power_sweep) {
    out << "ber_min_errors = " << config.sweep.ber_min_errors << "\n";
    out << "ber_max_symbols = " << config.sweep.ber_max_symbols << "\n";
  }

  out << "\n[optimizer]\n";
  out << "step_size = " << format_double(config.optimizer.step_size) << "\n";
  out << "max_iters = " << config.optimizer.max_iters << "\n";
  out << "tolerance = " << format_double(config.optimizer.tolerance) << "\n";
  out << "restarts = " << config.optimizer.restarts << "\n";

  out << "\n[seeds]\n";
  out << "master_seed = " << config.master_seed << "\n";
  return out.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::string config_digest(const ExperimentConfig& config) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(canonical_config_text(config))));
  return buffer;
}

ExperimentConfig default_capacity_config() {
  ExperimentConfig config;
  config.scenario.carrier_hz = 28e9;
  config.scenario.tx_power_dbm = 20.0;
  config.scenario.noise_dbm = -110.0;
  config.scenario.pathloss_exponent = 2.5;
  config.scenario.link_distance_m = 150.0;
  config.scenario.num_streams_or_users = 4;
  config.scenario.attenuation_ratio = 0.0;
  config.schemes.assign(kAllSchemes.begin(), kAllSchemes.end());
  config.sweep.variable = SweepVariable::kAttenuationRatio;
  config.sweep.start = 0.0;
  config.sweep.stop = 0.40;
  config.sweep.step = 0.02;
  config.sweep.realizations = 100;
  config.optimizer.step_size = 0.2;
  config.optimizer.max_iters = 600;
  config.optimizer.tolerance = 1e-5;
  config.optimizer.restarts = 1;
  config.master_seed = 20260808;
  return config;
}

ExperimentConfig default_ber_config() {
  ExperimentConfig config;
  config.scenario.carrier_hz = 28e9;
  config.scenario.tx_power_dbm = 30.0;
  config.scenario.noise_dbm = -125.0;
  config.scenario.pathloss_exponent = 2.5;
  config.scenario.link_distance_m = 150.0;
  config.scenario.num_streams_or_users = 4;
  config.scenario.attenuation_ratio = 0.48;
  config.user_azimuth_deg = {-28.0, -10.0, 10.0, 28.0};
  config.user_elevation_deg = {0.0, 0.0, 0.0, 0.0};
  config.schemes.assign(kAllSchemes.begin(), kAllSchemes.end());
  config.sweep.variable = SweepVariable::kTxPowerDbm;
  config.sweep.start = 0.0;
  config.sweep.stop = 40.0;
  config.sweep.step = 2.0;
  config.sweep.realizations = 20;
  config.sweep.ber_min_errors = 200;
  config.sweep.ber_max_symbols = 2'000'000;
  config.optimizer.step_size = 0.2;
  config.optimizer.max_iters = 120;
  config.optimizer.tolerance = 1e-6;
  config.optimizer.restarts = 1;
  config.master_seed = 20260808;
  return config;
}

}  // namespace simstack
