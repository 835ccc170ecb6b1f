// SPDX-License-Identifier: Apache-2.0

#include "simstack/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "simstack/errors.hpp"
#include "simstack/parallel.hpp"
#include "simstack/rng.hpp"
#include "simstack/version.hpp"

namespace simstack {

namespace {

// Substream purposes hung off the master seed.
enum StreamTag : std::uint64_t {
  kChannelStream = 1,
  kOptimizerStream = 2,
  kSymbolStream = 3,
};

std::uint64_t scheme_tag(SchemeId scheme) {
  return static_cast<std::uint64_t>(scheme);
}

std::string format_g17(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

double deg_to_rad(double degrees) { return degrees * kPi / 180.0; }

int resolve_workers(const RunOptions& options) {
  return options.workers > 0 ? options.workers : default_worker_count();
}

ExperimentConfig resolve_config(const ExperimentConfig& config,
                                const RunOptions& options) {
  ExperimentConfig resolved = config;
  if (options.seed_override) resolved.master_seed = *options.seed_override;
  resolved.validate();
  return resolved;
}

ExperimentResult make_result_shell(const ExperimentConfig& config,
                                   const char* metric) {
  ExperimentResult result;
  result.sweep_name = std::string(sweep_variable_name(config.sweep.variable));
  result.metric_name = metric;
  result.sweep_values = config.sweep.values();
  result.schemes = config.schemes;
  result.series.assign(config.schemes.size(),
                       std::vector<double>(result.sweep_values.size(), 0.0));
  result.realizations = config.sweep.realizations;
  result.master_seed = config.master_seed;
  result.config_digest = config_digest(config);
  return result;
}

}  // namespace

FrontEndDefaults front_end_defaults() { return {}; }

ArchitectureSpec scheme_architecture(SchemeId scheme, double lambda,
                                     double alpha) {
  const FrontEndDefaults defaults = front_end_defaults();
  const int rows = defaults.layer_rows;
  const int cols = defaults.layer_cols;
  const double gap = defaults.inter_layer_gap_m;
  switch (scheme) {
    case SchemeId::kSim1L:
      return make_conventional(1, rows, cols, lambda, gap, alpha);
    case SchemeId::kSim4L:
      return make_conventional(4, rows, cols, lambda, gap, alpha);
    case SchemeId::kSim7L:
      return make_conventional(7, rows, cols, lambda, gap, alpha);
    case SchemeId::kMfsim2L:
      return make_mfsim(rows, cols, lambda, gap, alpha);
    case SchemeId::kFilm2L:
      return make_film(rows, cols, lambda, gap,
                       defaults.film_displacement_bound_m, alpha);
    case SchemeId::kMimoDigital:
      break;
  }
  throw std::invalid_argument(
      "scheme_architecture: MIMO_DIGITAL has no metasurface architecture");
}

const std::vector<double>& ExperimentResult::scheme_series(
    SchemeId scheme) const {
  for (std::size_t s = 0; s < schemes.size(); ++s)
    if (schemes[s] == scheme) return series[s];
  throw std::invalid_argument("scheme_series: scheme not part of the result");
}

Eigen::MatrixXcd steering_channel_matrix(const LayerGeometry& geometry,
                                         const std::vector<double>& azimuth_deg,
                                         const std::vector<double>& elevation_deg,
                                         double lambda, double path_gain) {
  if (azimuth_deg.size() != elevation_deg.size())
    throw std::invalid_argument(
        "steering_channel_matrix: angle lists must have equal length");
  const auto users = static_cast<Eigen::Index>(azimuth_deg.size());
  Eigen::MatrixXcd channel(users, geometry.atom_count());
  const double amplitude = std::sqrt(path_gain);
  for (Eigen::Index u = 0; u < users; ++u) {
    const Eigen::VectorXcd response =
        steering_vector(deg_to_rad(azimuth_deg[static_cast<std::size_t>(u)]),
                        deg_to_rad(elevation_deg[static_cast<std::size_t>(u)]),
                        geometry, lambda);
    channel.row(u) = amplitude * response.adjoint();
  }
  return channel;
}

ExperimentResult run_capacity_vs_attenuation(const ExperimentConfig& raw_config,
                                             const RunOptions& options) {
  const ExperimentConfig config = resolve_config(raw_config, options);
  if (config.sweep.variable != SweepVariable::kAttenuationRatio)
    throw ConfigError("sweep.variable",
                      "capacity study requires variable = attenuation_ratio");
  ExperimentResult result = make_result_shell(config, "capacity_bps_hz");

  const Scenario& scenario = config.scenario;
  const double lambda = wavelength(scenario.carrier_hz);
  const double path_gain = path_loss(scenario.link_distance_m,
                                     scenario.pathloss_exponent, lambda);
  const int streams = scenario.num_streams_or_users;
  const LayerGeometry feed = feed_array_geometry(streams, lambda);
  const std::vector<double>& alphas = result.sweep_values;
  const int realizations = config.sweep.realizations;

  // Shared per-scheme couplings (attenuation-independent). All architectures
  // in a study radiate through the same aperture size so they can share the
  // per-realization channel draw.
  std::vector<CouplingSetPtr> couplings(config.schemes.size());
  std::vector<ArchitectureSpec> specs(config.schemes.size());
  int aperture = 0;
  for (std::size_t s = 0; s < config.schemes.size(); ++s) {
    if (config.schemes[s] == SchemeId::kMimoDigital) continue;
    specs[s] = scheme_architecture(config.schemes[s], lambda, 0.0);
    couplings[s] = build_couplings(specs[s], feed, lambda);
    if (aperture == 0) aperture = specs[s].aperture_atoms();
    if (specs[s].aperture_atoms() != aperture)
      throw ConfigError("schemes.enabled",
                        "schemes with different aperture sizes cannot share "
                        "one capacity study");
  }
  const int channel_cols = aperture > 0 ? aperture : streams;

  // Per-realization channels, shared across schemes and sweep points.
  std::vector<Eigen::MatrixXcd> channels(static_cast<std::size_t>(realizations));
  for (int r = 0; r < realizations; ++r)
    channels[static_cast<std::size_t>(r)] =
        rayleigh_channel(streams, channel_cols, path_gain,
                         derive_seed(config.master_seed,
                                     {kChannelStream,
                                      static_cast<std::uint64_t>(r)}))
            .matrix;

  const double tx_power_w = dbm_to_watts(scenario.tx_power_dbm);
  const double noise_w = dbm_to_watts(scenario.noise_dbm);

  // results[scheme][alpha][realization]
  std::vector<std::vector<std::vector<double>>> cells(
      config.schemes.size(),
      std::vector<std::vector<double>>(
          alphas.size(), std::vector<double>(realizations, 0.0)));

  const std::size_t task_count =
      config.schemes.size() * static_cast<std::size_t>(realizations);
  parallel_for(task_count, resolve_workers(options), [&](std::size_t task) {
    const std::size_t s = task / static_cast<std::size_t>(realizations);
    const int r = static_cast<int>(task % static_cast<std::size_t>(realizations));
    const SchemeId scheme = config.schemes[s];
    const Eigen::MatrixXcd& channel = channels[static_cast<std::size_t>(r)];

    if (scheme == SchemeId::kMimoDigital) {
      const double value =
          capacity(channel.topLeftCorner(streams, streams), tx_power_w,
                   noise_w, streams);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        cells[s][a][static_cast<std::size_t>(r)] = value;
      return;
    }

    ResponseEvaluator evaluator(specs[s], lambda, couplings[s]);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      evaluator.set_attenuation(alphas[a]);
      OptimizerParams params = config.optimizer;
      params.seed = derive_seed(
          config.master_seed,
          {kOptimizerStream, scheme_tag(scheme), static_cast<std::uint64_t>(a),
           static_cast<std::uint64_t>(r)});
      const OptimizationReport report =
          optimize_capacity(evaluator, channel, scenario, params);
      cells[s][a][static_cast<std::size_t>(r)] = report.best_objective;
    }
  });

  for (std::size_t s = 0; s < config.schemes.size(); ++s)
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      double sum = 0.0;
      for (int r = 0; r < realizations; ++r)
        sum += cells[s][a][static_cast<std::size_t>(r)];
      result.series[s][a] = sum / realizations;
    }
  return result;
}

ExperimentResult run_ber_vs_power(const ExperimentConfig& raw_config,
                                  const RunOptions& options) {
  const ExperimentConfig config = resolve_config(raw_config, options);
  if (config.sweep.variable != SweepVariable::kTxPowerDbm)
    throw ConfigError("sweep.variable",
                      "BER study requires variable = tx_power_dbm");
  ExperimentResult result = make_result_shell(config, "ber");

  const Scenario& scenario = config.scenario;
  const double lambda = wavelength(scenario.carrier_hz);
  const double path_gain = path_loss(scenario.link_distance_m,
                                     scenario.pathloss_exponent, lambda);
  const int users = scenario.num_streams_or_users;
  const LayerGeometry feed = feed_array_geometry(users, lambda);
  const std::vector<double>& powers = result.sweep_values;
  const int realizations = config.sweep.realizations;
  const double noise_w = dbm_to_watts(scenario.noise_dbm);
  const StoppingRule stop{config.sweep.ber_min_errors,
                          config.sweep.ber_max_symbols};

  // Channels and zero-forcing targets are deterministic (line-of-sight
  // steering); realizations average over optimizer initializations and
  // symbol noise.
  std::vector<ArchitectureSpec> specs(config.schemes.size());
  std::vector<CouplingSetPtr> couplings(config.schemes.size());
  std::vector<Eigen::MatrixXcd> user_channels(config.schemes.size());
  Eigen::MatrixXcd mimo_effective;
  for (std::size_t s = 0; s < config.schemes.size(); ++s) {
    const SchemeId scheme = config.schemes[s];
    if (scheme == SchemeId::kMimoDigital) {
      const Eigen::MatrixXcd channel = steering_channel_matrix(
          feed, config.user_azimuth_deg, config.user_elevation_deg, lambda,
          path_gain);
      mimo_effective = channel * zf_targets(channel);
      continue;
    }
    specs[s] =
        scheme_architecture(scheme, lambda, scenario.attenuation_ratio);
    couplings[s] = build_couplings(specs[s], feed, lambda);
    user_channels[s] = steering_channel_matrix(
        specs[s].aperture_geometry(), config.user_azimuth_deg,
        config.user_elevation_deg, lambda, path_gain);
  }

  // cells[scheme][power][realization]
  std::vector<std::vector<std::vector<double>>> cells(
      config.schemes.size(),
      std::vector<std::vector<double>>(
          powers.size(), std::vector<double>(realizations, 0.0)));

  const std::size_t task_count =
      config.schemes.size() * static_cast<std::size_t>(realizations);
  parallel_for(task_count, resolve_workers(options), [&](std::size_t task) {
    const std::size_t s = task / static_cast<std::size_t>(realizations);
    const int r = static_cast<int>(task % static_cast<std::size_t>(realizations));
    const SchemeId scheme = config.schemes[s];

    Eigen::MatrixXcd effective;
    if (scheme == SchemeId::kMimoDigital) {
      effective = mimo_effective;
    } else {
      ResponseEvaluator evaluator(specs[s], lambda, couplings[s]);
      OptimizerParams params = config.optimizer;
      params.seed = derive_seed(config.master_seed,
                                {kOptimizerStream, scheme_tag(scheme),
                                 static_cast<std::uint64_t>(r)});
      const OptimizationReport fit = fit_multiuser(
          evaluator, user_channels[s], dbm_to_watts(scenario.tx_power_dbm),
          noise_w, params);
      effective = user_channels[s] * evaluator.response(fit.final_config);
    }

    for (std::size_t p = 0; p < powers.size(); ++p) {
      const BerPoint point =
          ber_qpsk(effective, dbm_to_watts(powers[p]), noise_w,
                   derive_seed(config.master_seed,
                               {kSymbolStream, scheme_tag(scheme),
                                static_cast<std::uint64_t>(p),
                                static_cast<std::uint64_t>(r)}),
                   stop);
      cells[s][p][static_cast<std::size_t>(r)] = point.average;
    }
  });

  for (std::size_t s = 0; s < config.schemes.size(); ++s)
    for (std::size_t p = 0; p < powers.size(); ++p) {
      double sum = 0.0;
      for (int r = 0; r < realizations; ++r)
        sum += cells[s][p][static_cast<std::size_t>(r)];
      result.series[s][p] = sum / realizations;
    }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options) {
  return config.sweep.variable == SweepVariable::kAttenuationRatio
             ? run_capacity_vs_attenuation(config, options)
             : run_ber_vs_power(config, options);
}

double required_power_at_ber(const BerCurve& curve, double target_ber) {
  if (!(target_ber > 0.0 && target_ber < 1.0))
    throw std::invalid_argument("required_power_at_ber: target out of (0, 1)");
  const Eigen::Index points = curve.power_dbm.size();
  if (points < 1 || curve.ber.size() != points)
    throw std::invalid_argument("required_power_at_ber: malformed curve");

  const auto clamped_log10 = [&](Eigen::Index i) {
    double value = curve.ber(i);
    if (value <= 0.0) {
      const long long symbols =
          i < static_cast<Eigen::Index>(curve.symbols.size())
              ? curve.symbols[static_cast<std::size_t>(i)]
              : 0;
      value = symbols > 0 ? 0.5 / (2.0 * static_cast<double>(symbols)) : 1e-300;
    }
    return std::log10(value);
  };

  for (Eigen::Index i = 0; i < points; ++i) {
    if (!(curve.ber(i) <= target_ber)) continue;
    if (i == 0) return curve.power_dbm(0);
    const double log_target = std::log10(target_ber);
    const double log_prev = clamped_log10(i - 1);
    const double log_curr = clamped_log10(i);
    if (log_curr == log_prev) return curve.power_dbm(i);
    const double fraction = (log_target - log_prev) / (log_curr - log_prev);
    return curve.power_dbm(i - 1) +
           fraction * (curve.power_dbm(i) - curve.power_dbm(i - 1));
  }
  throw UnreachableTargetError(
      "required_power_at_ber: curve never reaches the target BER");
}

std::string result_to_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "sweep_value,scheme,metric,value,realizations,seed\n";
  for (std::size_t i = 0; i < result.sweep_values.size(); ++i)
    for (std::size_t s = 0; s < result.schemes.size(); ++s)
      out << format_g17(result.sweep_values[i]) << ','
          << scheme_name(result.schemes[s]) << ',' << result.metric_name << ','
          << format_g17(result.series[s][i]) << ',' << result.realizations
          << ',' << result.master_seed << "\n";
  return out.str();
}

ArtifactPaths write_experiment_artifacts(const ExperimentResult& result,
                                         const ExperimentConfig& config,
                                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  ArtifactPaths paths;
  paths.csv = (fs::path(out_dir) / (result.sweep_name + ".csv")).string();
  paths.metadata =
      (fs::path(out_dir) / (result.sweep_name + "_metadata.json")).string();

  {
    std::ofstream csv(paths.csv, std::ios::binary);
    if (!csv)
      throw std::runtime_error("cannot write CSV file: " + paths.csv);
    csv << result_to_csv(result);
  }

  const FrontEndDefaults defaults = front_end_defaults();
  nlohmann::ordered_json meta;
  meta["tool"] = "simstack";
  meta["version"] = kVersion;
  meta["experiment"] = result.sweep_name;
  meta["metric"] = result.metric_name;
  meta["config_digest"] = result.config_digest;
  meta["master_seed"] = result.master_seed;
  meta["canonical_config"] = canonical_config_text(config);
  nlohmann::ordered_json conventions;
  conventions["layer_rows"] = defaults.layer_rows;
  conventions["layer_cols"] = defaults.layer_cols;
  conventions["inter_layer_gap_m"] = defaults.inter_layer_gap_m;
  conventions["feed_gap_m"] = defaults.inter_layer_gap_m;
  conventions["film_displacement_bound_m"] =
      defaults.film_displacement_bound_m;
  conventions["atom_spacing"] = "half wavelength";
  conventions["atom_area"] = "(lambda/2)^2";
  conventions["mfsim_first_layer_atoms"] = "2x aperture, wired (2n,2n+1)->n";
  conventions["coupling_model"] =
      "w = (A cos(chi)/d) (1/(2 pi d) - i/lambda) exp(i 2 pi d/lambda), "
      "cos(chi) = |dz|/d";
  conventions["pathloss_anchor"] = "(lambda/4 pi)^2 at 1 m, d^-exponent decay";
  conventions["attenuation"] = "amplitude sqrt(1-alpha) per traversal";
  conventions["power_allocation"] = "equal per stream";
  conventions["ber_detection"] =
      "per-user matched detection, interference treated as noise";
  conventions["ber_user_average"] = "arithmetic mean";
  conventions["mimo_digital_baseline"] =
      "optimal linear precoding, leading streams x streams channel block";
  meta["conventions"] = conventions;

  std::ofstream metadata(paths.metadata, std::ios::binary);
  if (!metadata)
    throw std::runtime_error("cannot write metadata file: " + paths.metadata);
  metadata << meta.dump(2) << "\n";
  return paths;
}

}  // namespace simstack
