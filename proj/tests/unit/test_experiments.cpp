// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "simstack/errors.hpp"
#include "simstack/experiments.hpp"

using namespace simstack;

namespace {

ExperimentConfig tiny_capacity_config() {
  ExperimentConfig config = default_capacity_config();
  config.schemes = {SchemeId::kMimoDigital, SchemeId::kSim1L, SchemeId::kMfsim2L};
  config.sweep.start = 0.0;
  config.sweep.stop = 0.2;
  config.sweep.step = 0.1;
  config.sweep.realizations = 2;
  config.optimizer.max_iters = 15;
  return config;
}

std::string valid_config_text() {
  return canonical_config_text(default_ber_config());
}

}  // namespace

TEST_CASE("config parser round trip and digest stability") {
  const ExperimentConfig reference = default_ber_config();
  const std::string text = canonical_config_text(reference);
  const ExperimentConfig parsed = parse_config_text(text);
  CHECK(canonical_config_text(parsed) == text);
  CHECK(config_digest(parsed) == config_digest(reference));

  const ExperimentConfig capacity = default_capacity_config();
  CHECK(canonical_config_text(parse_config_text(
            canonical_config_text(capacity))) ==
        canonical_config_text(capacity));
  CHECK(config_digest(capacity) != config_digest(reference));
}

TEST_CASE("config parser rejects unknown keys with the field path") {
  std::string text = valid_config_text();
  text += "\n[sweep]\n";  // duplicate section header is fine; keys matter
  try {
    (void)parse_config_text(text + "fooo = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& error) {
    CHECK(error.field_path() == "sweep.fooo");
  }

  CHECK_THROWS_AS((void)parse_config_text("[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("key = 1\n"), ConfigError);

  // Duplicate keys are rejected.
  std::string duplicated = valid_config_text();
  duplicated += "\n[seeds]\nmaster_seed = 5\n";
  CHECK_THROWS_AS((void)parse_config_text(duplicated), ConfigError);

  // Missing required key.
  std::string missing;
  {
    std::istringstream lines(valid_config_text());
    std::string line;
    while (std::getline(lines, line))
      if (line.rfind("noise_dbm", 0) != 0) missing += line + "\n";
  }
  try {
    (void)parse_config_text(missing);
    FAIL("expected ConfigError");
  } catch (const ConfigError& error) {
    CHECK(error.field_path() == "scenario.noise_dbm");
  }
}

TEST_CASE("config cross-field validation") {
  // Attenuation sweeps must stay within [0, 0.4] and carry no user angles.
  ExperimentConfig config = default_capacity_config();
  config.sweep.stop = 0.6;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = default_capacity_config();
  config.user_azimuth_deg = {1.0, 2.0, 3.0, 4.0};
  CHECK_THROWS_AS(config.validate(), ConfigError);

  // Power sweeps need one direction per user.
  ExperimentConfig ber = default_ber_config();
  ber.user_azimuth_deg.pop_back();
  CHECK_THROWS_AS(ber.validate(), ConfigError);

  // Stopping-rule keys are power-sweep-only.
  std::string text = canonical_config_text(default_capacity_config());
  text += "\n[sweep]\nber_min_errors = 10\n";
  CHECK_THROWS_AS((void)parse_config_text(text), ConfigError);

  // Scheme duplicates are rejected.
  ExperimentConfig dupes = default_capacity_config();
  dupes.schemes = {SchemeId::kSim1L, SchemeId::kSim1L};
  CHECK_THROWS_AS(dupes.validate(), ConfigError);
}

TEST_CASE("sweep grids are inclusive") {
  SweepSpec sweep;
  sweep.start = 0.0;
  sweep.stop = 0.4;
  sweep.step = 0.02;
  CHECK(sweep.values().size() == 21);
  CHECK(sweep.values().front() == 0.0);
  CHECK(sweep.values().back() == doctest::Approx(0.4).epsilon(1e-12));

  sweep.start = 0.0;
  sweep.stop = 40.0;
  sweep.step = 2.0;
  CHECK(sweep.values().size() == 21);
}

TEST_CASE("scheme names round trip") {
  for (SchemeId scheme : kAllSchemes) {
    const auto parsed = parse_scheme(scheme_name(scheme));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == scheme);
  }
  CHECK(!parse_scheme("SIM_9L").has_value());
}

TEST_CASE("capacity runner shape, determinism, and worker independence") {
  const ExperimentConfig config = tiny_capacity_config();
  RunOptions serial;
  serial.workers = 1;
  const ExperimentResult result = run_capacity_vs_attenuation(config, serial);

  CHECK(result.sweep_name == "attenuation_ratio");
  CHECK(result.metric_name == "capacity_bps_hz");
  REQUIRE(result.sweep_values.size() == 3);
  REQUIRE(result.series.size() == config.schemes.size());
  for (const auto& series : result.series)
    CHECK(series.size() == result.sweep_values.size());
  CHECK(result.config_digest == config_digest(config));

  // The digital baseline ignores attenuation.
  const auto& mimo = result.scheme_series(SchemeId::kMimoDigital);
  CHECK(mimo[0] == mimo[1]);
  CHECK(mimo[0] == mimo[2]);

  // Metasurface schemes decay with attenuation.
  const auto& single_layer = result.scheme_series(SchemeId::kSim1L);
  CHECK(single_layer[0] > single_layer[1]);
  CHECK(single_layer[1] > single_layer[2]);

  RunOptions threaded;
  threaded.workers = 3;
  const ExperimentResult again = run_capacity_vs_attenuation(config, threaded);
  CHECK(result_to_csv(result) == result_to_csv(again));

  RunOptions reseeded;
  reseeded.workers = 2;
  reseeded.seed_override = 777;
  const ExperimentResult other = run_capacity_vs_attenuation(config, reseeded);
  CHECK(other.master_seed == 777);
  CHECK(result_to_csv(other) != result_to_csv(result));
}

TEST_CASE("csv format contract") {
  const ExperimentConfig config = tiny_capacity_config();
  RunOptions options;
  options.workers = 2;
  const ExperimentResult result = run_capacity_vs_attenuation(config, options);
  const std::string csv = result_to_csv(result);

  std::istringstream lines(csv);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "sweep_value,scheme,metric,value,realizations,seed");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.find("capacity_bps_hz") != std::string::npos);
    CHECK(line.back() != '\r');  // LF endings only
  }
  CHECK(rows == 3 * 3);  // one row per (sweep point, scheme)

  // Full-precision floats round trip.
  const double value = result.series[0][0];
  char printed[48];
  std::snprintf(printed, sizeof(printed), "%.17g", value);
  CHECK(csv.find(printed) != std::string::npos);
  CHECK(std::strtod(printed, nullptr) == value);
}

TEST_CASE("artifact files are written and reproducible") {
  const ExperimentConfig config = tiny_capacity_config();
  RunOptions options;
  options.workers = 2;
  const ExperimentResult result = run_capacity_vs_attenuation(config, options);
  const ArtifactPaths paths =
      write_experiment_artifacts(result, config, "/tmp/simstack_test_artifacts");
  std::ifstream csv(paths.csv, std::ios::binary);
  REQUIRE(csv.good());
  std::stringstream csv_data;
  csv_data << csv.rdbuf();
  CHECK(csv_data.str() == result_to_csv(result));

  std::ifstream metadata(paths.metadata, std::ios::binary);
  REQUIRE(metadata.good());
  std::stringstream meta_data;
  meta_data << metadata.rdbuf();
  CHECK(meta_data.str().find(result.config_digest) != std::string::npos);
  CHECK(meta_data.str().find("conventions") != std::string::npos);
}

TEST_CASE("required_power_at_ber interpolation") {
  BerCurve curve;
  curve.power_dbm.resize(4);
  curve.power_dbm << 0.0, 2.0, 4.0, 6.0;
  curve.ber.resize(4);

  // Exact grid hit.
  curve.ber << 1e-2, 1e-4, 1e-5, 1e-7;
  CHECK(required_power_at_ber(curve, 1e-5) == doctest::Approx(4.0));

  // Bracketed target: log-linear interpolation lands between the grid points.
  curve.ber << 1e-2, 1e-3, 1e-6, 1e-8;
  const double interpolated = required_power_at_ber(curve, 1e-5);
  CHECK(interpolated > 2.0);
  CHECK(interpolated < 4.0);
  CHECK(interpolated ==
        doctest::Approx(2.0 + 2.0 * (std::log10(1e-5) - std::log10(1e-3)) /
                                  (std::log10(1e-6) - std::log10(1e-3))));

  // Unreachable target.
  curve.ber << 1e-2, 5e-3, 2e-3, 1.5e-3;
  CHECK_THROWS_AS((void)required_power_at_ber(curve, 1e-5),
                  UnreachableTargetError);

  // Synthetic oracle curve: recover the analytic 1e-5 crossing within 0.1 dB.
  BerCurve oracle;
  oracle.power_dbm.resize(41);
  oracle.ber.resize(41);
  for (int i = 0; i <= 40; ++i) {
    oracle.power_dbm(i) = i;
    oracle.ber(i) = qpsk_awgn_oracle(std::pow(10.0, (i - 30.0) / 10.0));
  }
  double low = 0.0, high = 40.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (low + high);
    (qpsk_awgn_oracle(std::pow(10.0, (mid - 30.0) / 10.0)) > 1e-5 ? low : high) =
        mid;
  }
  CHECK(required_power_at_ber(oracle, 1e-5) ==
        doctest::Approx(0.5 * (low + high)).epsilon(0.003));
}

TEST_CASE("scheme_architecture wiring") {
  const double lambda = 299792458.0 / 28e9;
  CHECK(scheme_architecture(SchemeId::kSim7L, lambda, 0.1).num_layers() == 7);
  CHECK(scheme_architecture(SchemeId::kSim4L, lambda, 0.1).num_layers() == 4);
  CHECK(scheme_architecture(SchemeId::kFilm2L, lambda, 0.1).aperture_atoms() ==
        100);
  CHECK(scheme_architecture(SchemeId::kMfsim2L, lambda, 0.1).aperture_atoms() ==
        100);
  CHECK_THROWS_AS((void)scheme_architecture(SchemeId::kMimoDigital, lambda, 0.1),
                  std::invalid_argument);
}
