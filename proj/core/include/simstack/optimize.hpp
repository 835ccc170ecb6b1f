// SPDX-License-Identifier: Apache-2.0
//
// Configuration solvers. Phase profiles (and, for morphable stacks, bounded
// atom displacements) are tuned by projected gradient ascent with Armijo
// backtracking, so objective traces are monotone by construction. Gradients
// are analytic, propagated through the cascaded linear models; unit tests
// check them against central finite differences.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "simstack/architectures.hpp"
#include "simstack/cascade.hpp"
#include "simstack/metrics.hpp"

namespace simstack {

struct OptimizerParams {
  double step_size = 0.1;
  int max_iters = 500;
  double tolerance = 1e-6;  // relative objective change
  int restarts = 4;
  std::uint64_t seed = 0;
};

struct OptimizationReport {
  double best_objective = 0.0;
  std::vector<double> objective_trace;  // of the winning restart
  SimConfig final_config;
  bool converged = false;
};

/// Maximizes equal-power capacity of channel * G(config) over the
/// architecture's tunable parameters. Phases are reported wrapped to
/// [0, 2*pi); displacements stay inside the morphing bound after every
/// iterate. Best configuration over `restarts` random initializations
/// (deterministic in params.seed; ties keep the earliest restart).
OptimizationReport optimize_capacity(const ArchitectureSpec& spec,
                                     const ChannelRealization& channel,
                                     const Scenario& scenario,
                                     const OptimizerParams& params);

/// Evaluator-reuse variant for batch runs (couplings are shared, not
/// rebuilt). The channel matrix is passed directly.
OptimizationReport optimize_capacity(ResponseEvaluator& evaluator,
                                     const Eigen::MatrixXcd& channel,
                                     const Scenario& scenario,
                                     const OptimizerParams& params);

/// Analytic d(capacity)/d(phase) for every phase parameter, stacked in the
/// evaluator's layout (conventional: layer-major; meta-fiber: first-layer
/// thetas then second-layer phis; morphable: layer 1 then layer 2).
Eigen::VectorXd gradient_capacity_phases(const ArchitectureSpec& spec,
                                         const SimConfig& config,
                                         const ChannelRealization& channel,
                                         const Scenario& scenario);

/// Analytic d(capacity)/d(displacement coordinate) for morphable stacks
/// ([layer1 atom0 xyz, ..., layer2 ...]); empty for other architectures.
Eigen::VectorXd gradient_capacity_displacements(const ArchitectureSpec& spec,
                                                const SimConfig& config,
                                                const ChannelRealization& channel,
                                                const Scenario& scenario);

/// Zero-forcing precoder for row-channel matrix H (users x inputs):
/// H^H (H H^H)^(-1), columns normalized to unit power. Throws
/// SingularChannelError when the user rows are (numerically) dependent.
Eigen::MatrixXcd zf_targets(const Eigen::MatrixXcd& user_channels);

/// Fits the front-end response to a scaled target: minimizes
/// ||G(config) - c * target||_F with the scalar c in closed form per
/// iterate. best_objective and the trace hold the Frobenius residual
/// (non-increasing). For the meta-fiber stack the diagonal-gain structure
/// admits a closed-form row-wise fit (see the implementation notes); exactly
/// representable targets come back with zero residual and no iterations.
/// An optional warm start replaces the first restart's initialization.
OptimizationReport fit_precoder(const ArchitectureSpec& spec,
                                const Eigen::MatrixXcd& target,
                                const Scenario& scenario,
                                const OptimizerParams& params,
                                const SimConfig* warm_start = nullptr);

OptimizationReport fit_precoder(ResponseEvaluator& evaluator,
                                const Eigen::MatrixXcd& target,
                                const OptimizerParams& params,
                                const SimConfig* warm_start = nullptr);

/// Multi-user beamforming fit: maximizes the sum of per-user rates
///   sum_u log2(1 + p |E_uu|^2 / (p sum_{v != u} |E_uv|^2 + noise_w)),
/// E = user_channels * G(config), p = ref_tx_power_w / users, over the
/// configuration. Interference is treated as noise at a fixed reference
/// operating power, so one fit serves a whole transmit-power sweep. The
/// trace holds the achieved sum rate (non-decreasing).
OptimizationReport fit_multiuser(ResponseEvaluator& evaluator,
                                 const Eigen::MatrixXcd& user_channels,
                                 double ref_tx_power_w, double noise_w,
                                 const OptimizerParams& params,
                                 const SimConfig* warm_start = nullptr);

}  // namespace simstack
