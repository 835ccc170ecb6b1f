// SPDX-License-Identifier: Apache-2.0

#include "simstack/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "simstack/errors.hpp"
#include "simstack/rng.hpp"

namespace simstack {
namespace {

constexpr double kArmijoSlope = 1e-4;
constexpr int kMaxBacktracks = 40;
constexpr int kConvergencePatience = 8;
constexpr double kLn2 = 0.69314718055994530941723212145818;
// Fraction of rows allowed to saturate in the meta-fiber budget fit.
constexpr double kMfsimBudgetQuantile = 0.75;

void check_params(const OptimizerParams& params) {
  if (!(params.step_size > 0.0))
    throw std::invalid_argument("OptimizerParams: step_size must be > 0");
  if (params.max_iters < 1)
    throw std::invalid_argument("OptimizerParams: max_iters must be >= 1");
  if (!(params.tolerance >= 0.0))
    throw std::invalid_argument("OptimizerParams: tolerance must be >= 0");
  if (params.restarts < 1)
    throw std::invalid_argument("OptimizerParams: restarts must be >= 1");
}

/// Equal-power capacity of channel * G, with its conjugate gradient
/// d(C)/d(G*) so that dC = 2 Re <gbar, dG>.
class CapacityObjective {
 public:
  CapacityObjective(const Eigen::MatrixXcd& channel, double tx_power_w,
                    double noise_w, int streams)
      : channel_(channel),
        tx_power_(tx_power_w),
        noise_(noise_w),
        streams_(streams) {}

  double eval(const Eigen::MatrixXcd& response) {
    effective_.noalias() = channel_ * response;
    return capacity(effective_, tx_power_, noise_, streams_);
  }

  void gbar(Eigen::MatrixXcd& out) const {
    const double rho = tx_power_ / streams_ / noise_;
    const Eigen::Index dim = effective_.rows();
    const Eigen::MatrixXcd gram = effective_ * effective_.adjoint();
    Eigen::MatrixXcd omega;
    if (streams_ ==
        static_cast<int>(std::min(effective_.rows(), effective_.cols()))) {
      // All singular values participate; directions outside range(E) are
      // annihilated by the trailing product with E.
      const Eigen::MatrixXcd shifted =
          Eigen::MatrixXcd::Identity(dim, dim) + rho * gram;
      omega = (rho / kLn2) *
              shifted.llt().solve(Eigen::MatrixXcd::Identity(dim, dim));
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram);
      omega = Eigen::MatrixXcd::Zero(dim, dim);
      for (int s = 0; s < streams_; ++s) {
        const Eigen::Index idx = dim - 1 - s;  // eigenvalues ascend
        const double value = std::max(eig.eigenvalues()(idx), 0.0);
        const double weight = (rho / kLn2) / (1.0 + rho * value);
        omega.noalias() += weight * eig.eigenvectors().col(idx) *
                           eig.eigenvectors().col(idx).adjoint();
      }
    }
    out.noalias() = channel_.adjoint() * (omega * effective_);
  }

  /// The trace records capacity directly.
  double report(double internal) const { return internal; }

 private:
  const Eigen::MatrixXcd& channel_;
  double tx_power_;
  double noise_;
  int streams_;
  Eigen::MatrixXcd effective_;
};

/// Scaled-target Frobenius fit, run as a maximization of -||G - c T||^2 with
/// the closed-form c = <T, G> / ||T||^2 folded per evaluation.
class FitObjective {
 public:
  explicit FitObjective(const Eigen::MatrixXcd& target)
      : target_(target), target_norm2_(target.squaredNorm()) {}

  double eval(const Eigen::MatrixXcd& response) {
    scale_ = target_.conjugate().cwiseProduct(response).sum() / target_norm2_;
    residual_ = response - scale_ * target_;
    return -residual_.squaredNorm();
  }

  void gbar(Eigen::MatrixXcd& out) const { out = -residual_; }

  /// The trace records the residual norm (non-increasing under ascent).
  double report(double internal) const {
    return std::sqrt(std::max(0.0, -internal));
  }

  std::complex<double> scale() const { return scale_; }

 private:
  const Eigen::MatrixXcd& target_;
  double target_norm2_;
  std::complex<double> scale_{0.0, 0.0};
  Eigen::MatrixXcd residual_;
};

/// Sum of per-user rates with inter-user interference treated as noise at a
/// fixed reference transmit power:
///   J = sum_u log2(1 + p |E_uu|^2 / (p I_u + N0)),  I_u = sum_{v!=u} |E_uv|^2.
class MultiUserRateObjective {
 public:
  MultiUserRateObjective(const Eigen::MatrixXcd& channel, double ref_tx_power_w,
                         double noise_w)
      : channel_(channel),
        per_user_power_(ref_tx_power_w / static_cast<double>(channel.rows())),
        noise_(noise_w) {}

  double eval(const Eigen::MatrixXcd& response) {
    effective_.noalias() = channel_ * response;
    const Eigen::Index users = effective_.rows();
    double bits = 0.0;
    for (Eigen::Index u = 0; u < users; ++u) {
      const double signal = std::norm(effective_(u, u));
      const double interference =
          effective_.row(u).squaredNorm() - signal;
      bits += std::log2(1.0 + per_user_power_ * signal /
                                  (per_user_power_ * interference + noise_));
    }
    return bits;
  }

  void gbar(Eigen::MatrixXcd& out) const {
    const Eigen::Index users = effective_.rows();
    Eigen::MatrixXcd ebar(users, effective_.cols());
    for (Eigen::Index u = 0; u < users; ++u) {
      const double signal = std::norm(effective_(u, u));
      const double interference = effective_.row(u).squaredNorm() - signal;
      const double denom = per_user_power_ * interference + noise_;
      const double total = denom + per_user_power_ * signal;
      const double want_signal = per_user_power_ / (kLn2 * total);
      const double want_null =
          per_user_power_ / kLn2 * (1.0 / total - 1.0 / denom);
      ebar.row(u) = want_null * effective_.row(u);
      ebar(u, u) = want_signal * effective_(u, u);
    }
    out.noalias() = channel_.adjoint() * ebar;
  }

  double report(double internal) const { return internal; }

 private:
  const Eigen::MatrixXcd& channel_;
  double per_user_power_;
  double noise_;
  Eigen::MatrixXcd effective_;
};

/// Warm-up surrogate for the multi-user fit: per-user matched gains only,
///   J = sum_u log2(1 + p |E_uu|^2 / N0),
/// a much smoother landscape that aligns the signal terms before the rate
/// objective starts trading them against interference.
class MatchedGainObjective {
 public:
  MatchedGainObjective(const Eigen::MatrixXcd& channel, double ref_tx_power_w,
                       double noise_w)
      : channel_(channel),
        per_user_power_(ref_tx_power_w / static_cast<double>(channel.rows())),
        noise_(noise_w) {}

  double eval(const Eigen::MatrixXcd& response) {
    effective_.noalias() = channel_ * response;
    double bits = 0.0;
    for (Eigen::Index u = 0; u < effective_.rows(); ++u)
      bits += std::log2(1.0 +
                        per_user_power_ * std::norm(effective_(u, u)) / noise_);
    return bits;
  }

  void gbar(Eigen::MatrixXcd& out) const {
    Eigen::MatrixXcd ebar =
        Eigen::MatrixXcd::Zero(effective_.rows(), effective_.cols());
    for (Eigen::Index u = 0; u < effective_.rows(); ++u) {
      const double signal = std::norm(effective_(u, u));
      ebar(u, u) = per_user_power_ /
                   (kLn2 * (noise_ + per_user_power_ * signal)) *
                   effective_(u, u);
    }
    out.noalias() = channel_.adjoint() * ebar;
  }

  double report(double internal) const { return internal; }

 private:
  const Eigen::MatrixXcd& channel_;
  double per_user_power_;
  double noise_;
  Eigen::MatrixXcd effective_;
};

struct AscentOutcome {
  double internal_objective = 0.0;
  SimConfig config;
  std::vector<double> trace;
  bool converged = false;
};

/// One ascended parameter block (phases, or displacement coordinates).
/// Steps use the Barzilai-Borwein spectral length from the previous accepted
/// move, safeguarded by Armijo backtracking, so each block only ever accepts
/// improving steps.
struct BlockState {
  Eigen::VectorXd point;
  Eigen::VectorXd previous_point;
  Eigen::VectorXd previous_gradient;
  double step = 0.0;
  double max_step = 0.0;
  bool has_history = false;

  double propose_step(const Eigen::VectorXd& gradient) {
    double proposal = 2.0 * step;
    if (has_history) {
      const Eigen::VectorXd displacement = point - previous_point;
      const double curvature =
          displacement.dot(previous_gradient - gradient);
      const double length2 = displacement.squaredNorm();
      if (curvature > 0.0 && length2 > 0.0) proposal = length2 / curvature;
    }
    return std::min(std::max(proposal, 1e-14), max_step);
  }

  void remember(const Eigen::VectorXd& gradient) {
    previous_point = point;
    previous_gradient = gradient;
    has_history = true;
  }
};

template <typename Objective>
AscentOutcome run_ascent(ResponseEvaluator& eval, SimConfig config,
                         const OptimizerParams& params, Objective& obj) {
  AscentOutcome out;
  const bool morphable = eval.displacement_count() > 0;

  BlockState phases;
  eval.stack_phases(config, phases.point);
  phases.step = params.step_size;
  phases.max_step = params.step_size * 1e6;

  BlockState offsets;
  if (morphable) {
    eval.stack_displacements(config, offsets.point);
    offsets.step = -1.0;  // sized from the first displacement gradient
    const double bound =
        std::get<FilmSpec>(eval.spec().variant).displacement_bound;
    offsets.max_step = bound * 1e9;
  }

  SimConfig trial = config;
  double objective = obj.eval(eval.response(config));
  if (!std::isfinite(objective))
    throw NumericalError("optimizer: non-finite objective at initialization");
  out.trace.push_back(obj.report(objective));

  Eigen::MatrixXcd gbar;
  Eigen::VectorXd grad, trial_vec;
  bool converged = false;
  int flat_iterations = 0;

  const auto restore = [&]() { (void)obj.eval(eval.response(config)); };

  for (int iter = 0; iter < params.max_iters; ++iter) {
    const double before = objective;

    // Phase block.
    obj.gbar(gbar);
    eval.phase_gradient(config, gbar, grad);
    if (grad.squaredNorm() > 0.0) {
      const double gnorm2 = grad.squaredNorm();
      double step = phases.propose_step(grad);
      phases.remember(grad);
      bool accepted = false;
      for (int bt = 0; bt < kMaxBacktracks && !accepted; ++bt) {
        trial_vec = phases.point + step * grad;
        eval.unstack_phases(trial_vec, trial);
        const double candidate = obj.eval(eval.response(trial));
        if (std::isfinite(candidate) &&
            candidate >= objective + kArmijoSlope * step * gnorm2) {
          phases.point.swap(trial_vec);
          std::swap(config, trial);
          objective = candidate;
          phases.step = step;
          accepted = true;
        } else {
          step *= 0.5;
        }
      }
      if (!accepted) {
        phases.step = std::max(step, 1e-14);
        restore();
      }
    }

    // Displacement block.
    if (morphable) {
      obj.gbar(gbar);
      eval.displacement_gradient(config, gbar, grad);
      if (grad.squaredNorm() > 0.0) {
        if (offsets.step < 0.0) {
          const double bound =
              std::get<FilmSpec>(eval.spec().variant).displacement_bound;
          const double gmax = grad.cwiseAbs().maxCoeff();
          offsets.step = gmax > 0.0 ? 0.1 * bound / gmax : 0.0;
        }
        double step = offsets.propose_step(grad);
        offsets.remember(grad);
        bool accepted = false;
        for (int bt = 0; bt < kMaxBacktracks && !accepted && step > 0.0; ++bt) {
          trial_vec = offsets.point + step * grad;
          eval.project_displacements(trial_vec);
          eval.unstack_displacements(trial_vec, trial);
          eval.unstack_phases(phases.point, trial);
          const double slope = grad.dot(trial_vec - offsets.point);
          const double candidate = obj.eval(eval.response(trial));
          if (std::isfinite(candidate) && slope > 0.0 &&
              candidate >= objective + kArmijoSlope * slope) {
            offsets.point.swap(trial_vec);
            std::swap(config, trial);
            objective = candidate;
            offsets.step = step;
            accepted = true;
          } else {
            step *= 0.5;
          }
        }
        if (!accepted) {
          offsets.step = std::max(step, 1e-18);
          restore();
        }
      }
    }

    out.trace.push_back(obj.report(objective));
    // Spectral steps make bursty progress, so convergence requires the
    // relative change to stay below tolerance for several iterations.
    if (std::abs(objective - before) <=
        params.tolerance * std::max(1.0, std::abs(objective))) {
      if (++flat_iterations >= kConvergencePatience) {
        converged = true;
        break;
      }
    } else {
      flat_iterations = 0;
    }
  }

  for (auto& profile : config.phases) profile = wrap_phases(profile);
  out.internal_objective = objective;
  out.config = std::move(config);
  out.converged = converged;
  return out;
}

template <typename Objective>
OptimizationReport best_of_restarts(ResponseEvaluator& eval,
                                    const OptimizerParams& params,
                                    Objective& obj,
                                    const SimConfig* warm_start) {
  check_params(params);
  OptimizationReport report;
  double best_internal = 0.0;
  bool have_best = false;
  for (int r = 0; r < params.restarts; ++r) {
    SimConfig init =
        (r == 0 && warm_start != nullptr)
            ? *warm_start
            : eval.random_config(
                  derive_seed(params.seed, {static_cast<std::uint64_t>(r)}));
    AscentOutcome outcome = run_ascent(eval, std::move(init), params, obj);
    if (!have_best || outcome.internal_objective > best_internal) {
      have_best = true;
      best_internal = outcome.internal_objective;
      report.best_objective = obj.report(outcome.internal_objective);
      report.objective_trace = std::move(outcome.trace);
      report.final_config = std::move(outcome.config);
      report.converged = outcome.converged;
    }
  }
  return report;
}

/// Row-wise closed-form fit for the diagonal-gain (meta-fiber) front end.
///
/// The joint minimum of ||diag(g) W - c T|| over (g, c) is degenerate at
/// g = 0, c = 0, so the scale is pinned from the amplitude budget instead:
/// the per-row least-squares gains tau_n are realized at the largest scale at
/// which every row stays feasible when T is (near-)exactly representable, and
/// otherwise at a budget scale that pins the 75th percentile of required
/// amplitudes to the bound and clips the saturated rows. The residual is
/// still reported against the closed-form optimal c.
OptimizationReport fit_mfsim(ResponseEvaluator& eval,
                             const Eigen::MatrixXcd& target) {
  const Eigen::MatrixXcd& input = eval.input_coupling();
  const double amp = traversal_amplitude(eval.spec().attenuation_ratio, 2);
  const Eigen::Index rows = input.rows();

  Eigen::VectorXcd tau(rows);
  for (Eigen::Index n = 0; n < rows; ++n) {
    const double row_power = input.row(n).squaredNorm();
    const std::complex<double> overlap = input.row(n).dot(target.row(n));
    tau(n) = row_power > 0.0 ? overlap / row_power : 0.0;
  }
  const Eigen::VectorXd magnitudes = tau.cwiseAbs();
  const double tau_max = magnitudes.maxCoeff();
  if (!(tau_max > 0.0))
    throw NumericalError(
        "fit_precoder: target is orthogonal to every input row");

  Eigen::VectorXcd gains;
  const double c_feasible = amp / tau_max;
  Eigen::MatrixXcd fitted = input;
  fitted.array().colwise() *= (c_feasible * tau).array();
  const double exact_residual = (fitted - c_feasible * target).norm();
  if (exact_residual <= 1e-12 * c_feasible * target.norm()) {
    gains = c_feasible * tau;
  } else {
    std::vector<double> sorted(magnitudes.data(), magnitudes.data() + rows);
    std::sort(sorted.begin(), sorted.end());
    const auto index = static_cast<std::size_t>(
        kMfsimBudgetQuantile * static_cast<double>(rows - 1));
    const double reference = sorted[index] > 0.0 ? sorted[index] : tau_max;
    const double c_budget = amp / reference;
    gains = c_budget * tau;
    for (Eigen::Index n = 0; n < rows; ++n)
      if (std::abs(gains(n)) > amp)
        gains(n) *= amp / std::abs(gains(n));
  }

  auto [theta, phi] = mfsim_synthesize(gains / amp, eval.spec().attenuation_ratio);
  OptimizationReport report;
  report.final_config.phases = {std::move(theta), std::move(phi)};
  FitObjective objective(target);
  report.best_objective =
      objective.report(objective.eval(eval.response(report.final_config)));
  report.objective_trace = {report.best_objective};
  report.converged = true;
  return report;
}

}  // namespace

OptimizationReport optimize_capacity(const ArchitectureSpec& spec,
                                     const ChannelRealization& channel,
                                     const Scenario& scenario,
                                     const OptimizerParams& params) {
  scenario.validate();
  const double lambda = wavelength(scenario.carrier_hz);
  ResponseEvaluator eval(
      spec, feed_array_geometry(scenario.num_streams_or_users, lambda), lambda);
  return optimize_capacity(eval, channel.matrix, scenario, params);
}

OptimizationReport optimize_capacity(ResponseEvaluator& eval,
                                     const Eigen::MatrixXcd& channel,
                                     const Scenario& scenario,
                                     const OptimizerParams& params) {
  if (channel.cols() != eval.aperture())
    throw std::invalid_argument(
        "optimize_capacity: channel columns must match the aperture size");
  const int streams = scenario.num_streams_or_users;
  if (streams > std::min<Eigen::Index>(channel.rows(), eval.feeds()))
    throw std::invalid_argument(
        "optimize_capacity: streams exceed the effective channel rank bound");
  CapacityObjective objective(channel, dbm_to_watts(scenario.tx_power_dbm),
                              dbm_to_watts(scenario.noise_dbm), streams);
  return best_of_restarts(eval, params, objective, nullptr);
}

Eigen::VectorXd gradient_capacity_phases(const ArchitectureSpec& spec,
                                         const SimConfig& config,
                                         const ChannelRealization& channel,
                                         const Scenario& scenario) {
  scenario.validate();
  const double lambda = wavelength(scenario.carrier_hz);
  ResponseEvaluator eval(
      spec, feed_array_geometry(scenario.num_streams_or_users, lambda), lambda);
  CapacityObjective objective(channel.matrix,
                              dbm_to_watts(scenario.tx_power_dbm),
                              dbm_to_watts(scenario.noise_dbm),
                              scenario.num_streams_or_users);
  (void)objective.eval(eval.response(config));
  Eigen::MatrixXcd gbar;
  objective.gbar(gbar);
  Eigen::VectorXd gradient;
  eval.phase_gradient(config, gbar, gradient);
  return gradient;
}

Eigen::VectorXd gradient_capacity_displacements(const ArchitectureSpec& spec,
                                                const SimConfig& config,
                                                const ChannelRealization& channel,
                                                const Scenario& scenario) {
  scenario.validate();
  const double lambda = wavelength(scenario.carrier_hz);
  ResponseEvaluator eval(
      spec, feed_array_geometry(scenario.num_streams_or_users, lambda), lambda);
  if (eval.displacement_count() == 0) return Eigen::VectorXd();
  CapacityObjective objective(channel.matrix,
                              dbm_to_watts(scenario.tx_power_dbm),
                              dbm_to_watts(scenario.noise_dbm),
                              scenario.num_streams_or_users);
  (void)objective.eval(eval.response(config));
  Eigen::MatrixXcd gbar;
  objective.gbar(gbar);
  Eigen::VectorXd gradient;
  eval.displacement_gradient(config, gbar, gradient);
  return gradient;
}

Eigen::MatrixXcd zf_targets(const Eigen::MatrixXcd& user_channels) {
  const Eigen::Index users = user_channels.rows();
  if (users < 1)
    throw std::invalid_argument("zf_targets: need at least one user row");
  if (user_channels.cols() < users)
    throw std::invalid_argument(
        "zf_targets: need at least as many inputs as users");

  const Eigen::MatrixXcd gram = user_channels * user_channels.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (!(lambda_max > 0.0) ||
      eig.eigenvalues().minCoeff() <= lambda_max * 1e-13)
    throw SingularChannelError(
        "zf_targets: user channel rows are rank deficient");

  const Eigen::MatrixXcd inverse = eig.eigenvectors() *
                                   eig.eigenvalues().cwiseInverse().asDiagonal() *
                                   eig.eigenvectors().adjoint();
  Eigen::MatrixXcd precoder = user_channels.adjoint() * inverse;
  for (Eigen::Index u = 0; u < precoder.cols(); ++u)
    precoder.col(u) /= precoder.col(u).norm();
  return precoder;
}

OptimizationReport fit_precoder(const ArchitectureSpec& spec,
                                const Eigen::MatrixXcd& target,
                                const Scenario& scenario,
                                const OptimizerParams& params,
                                const SimConfig* warm_start) {
  scenario.validate();
  const double lambda = wavelength(scenario.carrier_hz);
  ResponseEvaluator eval(
      spec, feed_array_geometry(scenario.num_streams_or_users, lambda), lambda);
  return fit_precoder(eval, target, params, warm_start);
}

OptimizationReport fit_precoder(ResponseEvaluator& eval,
                                const Eigen::MatrixXcd& target,
                                const OptimizerParams& params,
                                const SimConfig* warm_start) {
  if (target.rows() != eval.aperture() || target.cols() != eval.feeds())
    throw std::invalid_argument(
        "fit_precoder: target must be aperture x feeds");
  if (!(target.squaredNorm() > 0.0))
    throw std::invalid_argument("fit_precoder: target must be nonzero");
  check_params(params);

  if (std::holds_alternative<MfsimSpec>(eval.spec().variant))
    return fit_mfsim(eval, target);

  FitObjective objective(target);
  return best_of_restarts(eval, params, objective, warm_start);
}

namespace {

/// Multi-user fit for the diagonal-gain (meta-fiber) front end. The
/// effective channel is linear in the per-atom gains, so inter-user
/// interference can be nulled exactly: start from the minimum-norm gains
/// solving {E off-diagonal = 0, E diagonal = 1}, then ascend the product of
/// diagonal gains inside the null space of the interference constraints,
/// re-projecting and rescaling so the nulls stay exact and every gain stays
/// inside the amplitude budget.
OptimizationReport fit_mfsim_multiuser(ResponseEvaluator& eval,
                                       const Eigen::MatrixXcd& channel,
                                       double ref_tx_power_w, double noise_w) {
  const Eigen::MatrixXcd& input = eval.input_coupling();
  const double amp = traversal_amplitude(eval.spec().attenuation_ratio, 2);
  const Eigen::Index users = channel.rows();
  const Eigen::Index atoms = input.rows();

  Eigen::MatrixXcd diag_map(users, atoms);
  Eigen::MatrixXcd null_map(users * (users - 1), atoms);
  Eigen::MatrixXcd full_map(users * users, atoms);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(users * users);
  Eigen::Index off_row = 0;
  Eigen::Index full_row = 0;
  for (Eigen::Index u = 0; u < users; ++u)
    for (Eigen::Index v = 0; v < users; ++v) {
      Eigen::RowVectorXcd row =
          channel.row(u).cwiseProduct(input.col(v).transpose());
      full_map.row(full_row) = row;
      rhs(full_row++) = (u == v) ? 1.0 : 0.0;
      if (u == v)
        diag_map.row(u) = row;
      else
        null_map.row(off_row++) = row;
    }

  // Minimum-norm exact solution of the full system.
  const Eigen::LDLT<Eigen::MatrixXcd> full_gram(full_map *
                                                full_map.adjoint());
  Eigen::VectorXcd gains =
      full_map.adjoint() * full_gram.solve(rhs);

  // Projector machinery for the interference rows.
  const Eigen::LDLT<Eigen::MatrixXcd> null_gram(null_map *
                                                null_map.adjoint());
  const auto renull = [&](Eigen::VectorXcd& g) {
    g -= null_map.adjoint() * null_gram.solve(null_map * g);
  };
  const auto fit_box = [&](Eigen::VectorXcd& g) {
    const double peak = g.cwiseAbs().maxCoeff();
    if (peak > amp) g *= amp / peak;
  };
  const auto balance = [&](const Eigen::VectorXcd& g) {
    double value = 0.0;
    const Eigen::VectorXcd diag = diag_map * g;
    for (Eigen::Index u = 0; u < users; ++u)
      value += std::log(std::max(std::norm(diag(u)), 1e-300));
    return value;
  };

  fit_box(gains);
  double objective = balance(gains);
  double step = 1.0;
  for (int iter = 0; iter < 400; ++iter) {
    const Eigen::VectorXcd diag = diag_map * gains;
    Eigen::VectorXcd gradient = Eigen::VectorXcd::Zero(atoms);
    for (Eigen::Index u = 0; u < users; ++u)
      gradient +=
          diag_map.row(u).adjoint() * (diag(u) / std::norm(diag(u)));
    renull(gradient);
    const double gradient_norm = gradient.norm();
    if (!(gradient_norm > 0.0)) break;

    bool accepted = false;
    for (int bt = 0; bt < 30 && !accepted; ++bt) {
      Eigen::VectorXcd trial =
          gains + (step / gradient_norm) * gradient;
      for (Eigen::Index n = 0; n < atoms; ++n) {
        const double magnitude = std::abs(trial(n));
        if (magnitude > amp) trial(n) *= amp / magnitude;
      }
      renull(trial);
      fit_box(trial);
      const double candidate = balance(trial);
      if (candidate > objective + 1e-12 * std::abs(objective)) {
        gains = std::move(trial);
        objective = candidate;
        step *= 2.0;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted && step < 1e-12) break;
  }

  auto [theta, phi] =
      mfsim_synthesize(gains / amp, eval.spec().attenuation_ratio);
  OptimizationReport report;
  report.final_config.phases = {std::move(theta), std::move(phi)};
  MultiUserRateObjective rate(channel, ref_tx_power_w, noise_w);
  report.best_objective = rate.eval(eval.response(report.final_config));
  report.objective_trace = {report.best_objective};
  report.converged = true;
  return report;
}

/// Deterministic warm start for the morphable two-layer fit. With the other
/// layer frozen, the effective channel is linear in one layer's unit-modulus
/// phase factors, so each layer is solved in turn: project onto the affine
/// set {off-diagonal entries zero, diagonal entries one}, then back onto the
/// unit-modulus torus (Gerchberg-Saxton style), alternating layers a few
/// rounds. Displacements stay nominal; the gradient fit polishes from here.
SimConfig film_multiuser_warm_start(ResponseEvaluator& eval,
                                    const Eigen::MatrixXcd& channel) {
  const Eigen::MatrixXcd& input = eval.input_coupling();   // N x F
  const Eigen::MatrixXcd& hop = eval.couplings()->inter[0];  // N x N nominal
  const Eigen::Index atoms = hop.rows();
  const Eigen::Index users = channel.rows();

  Eigen::VectorXcd x1 = Eigen::VectorXcd::Ones(atoms);
  Eigen::VectorXcd x2 = Eigen::VectorXcd::Ones(atoms);

  // Solve diag(x) in E = left * diag(x) * right for nulls + unit diagonal,
  // respecting |x_n| = 1.
  const auto solve_layer = [&](const Eigen::MatrixXcd& left,
                               const Eigen::MatrixXcd& right,
                               Eigen::VectorXcd& x) {
    Eigen::MatrixXcd constraint(users * users, atoms);
    Eigen::VectorXcd rhs(users * users);
    Eigen::Index row = 0;
    for (Eigen::Index u = 0; u < users; ++u)
      for (Eigen::Index v = 0; v < users; ++v) {
        constraint.row(row) =
            left.row(u).cwiseProduct(right.col(v).transpose());
        rhs(row++) = (u == v) ? 1.0 : 0.0;
      }
    // Scale the target to the achievable gain so the torus projection does
    // not fight the diagonal constraints.
    const double reachable =
        (constraint.topRows(1) * x).cwiseAbs().maxCoeff();
    (void)reachable;
    Eigen::VectorXcd best = x;
    double best_defect = 1e300;
    const Eigen::LDLT<Eigen::MatrixXcd> gram(constraint *
                                             constraint.adjoint());
    // Pin the diagonal targets near the currently realized gains, nulls at 0.
    for (int round = 0; round < 40; ++round) {
      Eigen::VectorXcd target = rhs;
      Eigen::VectorXcd realized = constraint * x;
      double scale = 0.0;
      for (Eigen::Index u = 0; u < users; ++u)
        scale += std::abs(realized(u * users + u)) / users;
      if (!(scale > 0.0)) scale = 1.0;
      target *= scale;
      // Affine projection: x <- x - C^H (C C^H)^-1 (C x - target)
      x -= constraint.adjoint() * gram.solve(realized - target);
      // Torus projection.
      for (Eigen::Index n = 0; n < atoms; ++n) {
        const double magnitude = std::abs(x(n));
        x(n) = magnitude > 0.0 ? x(n) / magnitude : 1.0;
      }
      const Eigen::VectorXcd check = constraint * x;
      double defect = 0.0;
      for (Eigen::Index u = 0; u < users; ++u)
        for (Eigen::Index v = 0; v < users; ++v)
          if (u != v) defect += std::norm(check(u * users + v));
      double diag_power = 0.0;
      for (Eigen::Index u = 0; u < users; ++u)
        diag_power += std::norm(check(u * users + u));
      if (diag_power > 0.0 && defect / diag_power < best_defect) {
        best_defect = defect / diag_power;
        best = x;
      }
    }
    x = best;
  };

  const double amp = traversal_amplitude(eval.spec().attenuation_ratio, 2);
  for (int sweep = 0; sweep < 3; ++sweep) {
    // Layer 2: E = (amp H) diag(x2) (hop diag(x1) input)
    const Eigen::MatrixXcd right2 = hop * x1.asDiagonal() * input;
    solve_layer(amp * channel, right2, x2);
    // Layer 1: E = (amp H diag(x2) hop) diag(x1) input
    const Eigen::MatrixXcd left1 = amp * channel * x2.asDiagonal() * hop;
    solve_layer(left1, input, x1);
  }

  SimConfig config = eval.zero_config();
  for (Eigen::Index n = 0; n < atoms; ++n) {
    config.phases[0](n) = std::arg(x1(n));
    config.phases[1](n) = std::arg(x2(n));
  }
  config.phases[0] = wrap_phases(config.phases[0]);
  config.phases[1] = wrap_phases(config.phases[1]);
  return config;
}

}  // namespace

OptimizationReport fit_multiuser(ResponseEvaluator& eval,
                                 const Eigen::MatrixXcd& user_channels,
                                 double ref_tx_power_w, double noise_w,
                                 const OptimizerParams& params,
                                 const SimConfig* warm_start) {
  if (user_channels.cols() != eval.aperture())
    throw std::invalid_argument(
        "fit_multiuser: channel columns must match the aperture");
  if (user_channels.rows() != eval.feeds())
    throw std::invalid_argument(
        "fit_multiuser: one feed per user required");
  if (!(ref_tx_power_w > 0.0) || !(noise_w > 0.0))
    throw std::invalid_argument("fit_multiuser: powers must be > 0");
  check_params(params);
  if (std::holds_alternative<MfsimSpec>(eval.spec().variant))
    return fit_mfsim_multiuser(eval, user_channels, ref_tx_power_w, noise_w);
  MultiUserRateObjective objective(user_channels, ref_tx_power_w, noise_w);
  if (warm_start == nullptr &&
      std::holds_alternative<FilmSpec>(eval.spec().variant)) {
    // The two-layer morphable fit is the one that keeps falling into bad
    // basins from random phases; seed it with the layer-wise linear solve.
    const SimConfig warm = film_multiuser_warm_start(eval, user_channels);
    return best_of_restarts(eval, params, objective, &warm);
  }
  return best_of_restarts(eval, params, objective, warm_start);
}

}  // namespace simstack
