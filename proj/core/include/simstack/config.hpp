// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: a strict, human-editable key-value format with
// five sections {scenario, schemes, sweep, optimizer, seeds}. Unknown
// sections or keys are errors; error messages carry the field path. A
// canonical serialization (fixed key order, full-precision floats) backs the
// content digest recorded with every result.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simstack/metrics.hpp"
#include "simstack/optimize.hpp"

namespace simstack {

enum class SchemeId {
  kMimoDigital,
  kSim1L,
  kSim4L,
  kSim7L,
  kMfsim2L,
  kFilm2L,
};

inline constexpr std::array<SchemeId, 6> kAllSchemes = {
    SchemeId::kMimoDigital, SchemeId::kSim1L,   SchemeId::kSim4L,
    SchemeId::kSim7L,       SchemeId::kMfsim2L, SchemeId::kFilm2L,
};

std::string_view scheme_name(SchemeId scheme);
std::optional<SchemeId> parse_scheme(std::string_view name);

enum class SweepVariable { kAttenuationRatio, kTxPowerDbm };

std::string_view sweep_variable_name(SweepVariable variable);

struct SweepSpec {
  SweepVariable variable = SweepVariable::kAttenuationRatio;
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;
  int realizations = 1;
  // Monte Carlo stopping rule; tx-power sweeps only.
  long long ber_min_errors = 200;
  long long ber_max_symbols = 10'000'000;

  std::vector<double> values() const;  // inclusive grid start, start+step, ...
};

struct ExperimentConfig {
  Scenario scenario;
  std::vector<double> user_azimuth_deg;    // tx-power sweeps only
  std::vector<double> user_elevation_deg;  // tx-power sweeps only
  std::vector<SchemeId> schemes;
  SweepSpec sweep;
  OptimizerParams optimizer;  // .seed is unused; master_seed drives streams
  std::uint64_t master_seed = 0;

  /// Cross-field validation; throws ConfigError with the field path.
  void validate() const;
};

/// Parses the strict sectioned key-value text. Throws ConfigError naming the
/// offending "section.key" for unknown keys, duplicates, bad values, and
/// missing required fields.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Fixed-order serialization with full-precision floats; parsing it back
/// yields an identical configuration.
std::string canonical_config_text(const ExperimentConfig& config);

/// FNV-1a (64-bit) over a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

/// Hex digest of the canonical serialization.
std::string config_digest(const ExperimentConfig& config);

/// Shipped defaults for the two studies (also available as files under
/// configs/).
ExperimentConfig default_capacity_config();
ExperimentConfig default_ber_config();

}  // namespace simstack
