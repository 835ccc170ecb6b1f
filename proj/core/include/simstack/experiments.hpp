// SPDX-License-Identifier: Apache-2.0
//
// Batch studies over the front-end schemes. Two sweeps are provided: mean
// optimized capacity versus the per-layer power attenuation ratio
// (point-to-point, Rayleigh channels), and mean QPSK bit-error rate versus
// transmit power (multi-user, line-of-sight steering channels with a
// zero-forcing fit). Runs are reproducible to the byte: every random quantity
// draws from a stream derived from (master_seed, scheme, sweep index,
// realization), tasks write indexed slots, and reductions run in index
// order, so the worker count never changes any output.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simstack/config.hpp"

namespace simstack {

/// Geometry and front-end conventions used by the studies (echoed into the
/// metadata sidecar so artifacts are self-describing).
struct FrontEndDefaults {
  int layer_rows = 10;
  int layer_cols = 10;
  double inter_layer_gap_m = 5e-3;  // also the feed-to-first-layer gap
  double film_displacement_bound_m = 2.4e-3;
  // Meta-fiber stack: first layer carries twice the aperture atoms, wired
  // (2n, 2n+1) -> n.
};

FrontEndDefaults front_end_defaults();

/// The architecture behind a scheme id at the given wavelength/attenuation.
/// MIMO_DIGITAL has no architecture (throws std::invalid_argument).
ArchitectureSpec scheme_architecture(SchemeId scheme, double lambda,
                                     double alpha);

struct ExperimentResult {
  std::string sweep_name;
  std::string metric_name;
  std::vector<double> sweep_values;
  std::vector<SchemeId> schemes;             // config order
  std::vector<std::vector<double>> series;   // [scheme][sweep point]
  int realizations = 0;
  std::uint64_t master_seed = 0;
  std::string config_digest;

  const std::vector<double>& scheme_series(SchemeId scheme) const;
};

struct RunOptions {
  int workers = 0;  // <= 0: hardware concurrency
  std::optional<std::uint64_t> seed_override;
};

ExperimentResult run_capacity_vs_attenuation(const ExperimentConfig& config,
                                             const RunOptions& options = {});
ExperimentResult run_ber_vs_power(const ExperimentConfig& config,
                                  const RunOptions& options = {});
/// Dispatches on config.sweep.variable.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {});

/// Transmit power reaching a target BER, by log-linear interpolation between
/// the bracketing grid points in (power, log10 BER). Zero BER estimates are
/// clamped to half an error over the simulated bits before taking the log.
/// Throws UnreachableTargetError when no point reaches the target.
double required_power_at_ber(const BerCurve& curve, double target_ber);

/// CSV emission: header sweep_value,scheme,metric,value,realizations,seed;
/// one row per (sweep point, scheme); LF endings; %.17g floats.
std::string result_to_csv(const ExperimentResult& result);

struct ArtifactPaths {
  std::string csv;
  std::string metadata;
};

/// Writes <out_dir>/<sweep_name>.csv plus the metadata sidecar (config
/// digest, canonical config, tool version, conventions in effect).
ArtifactPaths write_experiment_artifacts(const ExperimentResult& result,
                                         const ExperimentConfig& config,
                                         const std::string& out_dir);

/// Steering-vector downlink rows: row u = sqrt(path_gain) * a(az_u, el_u)^H
/// on the given radiating geometry.
Eigen::MatrixXcd steering_channel_matrix(const LayerGeometry& geometry,
                                         const std::vector<double>& azimuth_deg,
                                         const std::vector<double>& elevation_deg,
                                         double lambda, double path_gain);

}  // namespace simstack
