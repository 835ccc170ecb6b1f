// SPDX-License-Identifier: Apache-2.0

#include "simstack/validation.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <sstream>

#include "simstack/cascade.hpp"
#include "simstack/experiments.hpp"
#include "simstack/metrics.hpp"
#include "simstack/optimize.hpp"
#include "simstack/rng.hpp"

namespace simstack {

namespace {

constexpr std::uint64_t kValidationSeed = 0x5157ACE5EEDULL;

struct Harness {
  FaultInjection fault;
  std::vector<CheckResult> results;

  void record(const std::string& name, bool passed, const std::string& detail) {
    results.push_back({name, passed, detail});
  }
};

double capacity_of(ResponseEvaluator& evaluator, const SimConfig& config,
                   const Eigen::MatrixXcd& channel, const Scenario& scenario) {
  return capacity(channel * evaluator.response(config),
                  dbm_to_watts(scenario.tx_power_dbm),
                  dbm_to_watts(scenario.noise_dbm),
                  scenario.num_streams_or_users);
}

/// Max relative error between the analytic gradient and central finite
/// differences at `points` random configurations.
double gradient_error(const ArchitectureSpec& spec, const Scenario& scenario,
                      int points, bool displacements, std::uint64_t seed,
                      FaultInjection fault) {
  const double lambda = wavelength(scenario.carrier_hz);
  const LayerGeometry feed =
      feed_array_geometry(scenario.num_streams_or_users, lambda);
  ResponseEvaluator evaluator(spec, feed, lambda);
  const ChannelRealization channel =
      rayleigh_channel(scenario.num_streams_or_users, evaluator.aperture(),
                       1.0, derive_seed(seed, {11}));

  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    SimConfig config = evaluator.random_config(derive_seed(seed, {21, static_cast<std::uint64_t>(p)}));
    if (displacements) {
      // Random interior displacements keep the finite-difference stencil
      // inside the feasible box.
      Rng rng(derive_seed(seed, {31, static_cast<std::uint64_t>(p)}));
      const double bound = std::get<FilmSpec>(spec.variant).displacement_bound;
      for (auto& profile : config.displacements)
        for (Eigen::Index n = 0; n < profile.offsets.rows(); ++n)
          for (int j = 0; j < 3; ++j)
            profile.offsets(n, j) = 0.5 * bound * (2.0 * rng.next_double() - 1.0);
    }

    Eigen::VectorXd analytic =
        displacements
            ? gradient_capacity_displacements(spec, config, channel, scenario)
            : gradient_capacity_phases(spec, config, channel, scenario);
    if (fault == FaultInjection::kGradient && analytic.size() > 0)
      analytic(0) += 0.5 * (1.0 + std::abs(analytic(0)));

    Eigen::VectorXd numeric(analytic.size());
    const double step = displacements ? 1e-9 : 1e-6;
    Eigen::VectorXd stacked;
    if (displacements)
      evaluator.stack_displacements(config, stacked);
    else
      evaluator.stack_phases(config, stacked);
    SimConfig probe = config;
    for (Eigen::Index i = 0; i < stacked.size(); ++i) {
      Eigen::VectorXd shifted = stacked;
      shifted(i) = stacked(i) + step;
      if (displacements)
        evaluator.unstack_displacements(shifted, probe);
      else
        evaluator.unstack_phases(shifted, probe);
      const double upper = capacity_of(evaluator, probe, channel.matrix, scenario);
      shifted(i) = stacked(i) - step;
      if (displacements)
        evaluator.unstack_displacements(shifted, probe);
      else
        evaluator.unstack_phases(shifted, probe);
      const double lower = capacity_of(evaluator, probe, channel.matrix, scenario);
      numeric(i) = (upper - lower) / (2.0 * step);
      shifted(i) = stacked(i);
      if (displacements)
        evaluator.unstack_displacements(shifted, probe);
      else
        evaluator.unstack_phases(shifted, probe);
    }
    const double scale = std::max(numeric.norm(), 1e-12);
    worst = std::max(worst, (analytic - numeric).norm() / scale);
  }
  return worst;
}

Scenario small_scenario() {
  Scenario scenario;
  scenario.carrier_hz = 28e9;
  scenario.tx_power_dbm = 20.0;
  scenario.noise_dbm = -80.0;
  scenario.pathloss_exponent = 2.5;
  scenario.link_distance_m = 150.0;
  scenario.num_streams_or_users = 2;
  scenario.attenuation_ratio = 0.1;
  return scenario;
}

void check_gradients(Harness& harness) {
  const Scenario scenario = small_scenario();
  const double lambda = wavelength(scenario.carrier_hz);
  const double gap = 5e-3;

  const auto run = [&](const std::string& name, const ArchitectureSpec& spec,
                       bool displacements) {
    const double error = gradient_error(spec, scenario, 5, displacements,
                                        kValidationSeed, harness.fault);
    std::ostringstream detail;
    detail << "max relative error vs central differences: " << error;
    harness.record(name, error < 1e-5, detail.str());
  };

  run("gradient_conventional_1l",
      make_conventional(1, 3, 3, lambda, gap, 0.1), false);
  run("gradient_conventional_4l",
      make_conventional(4, 3, 3, lambda, gap, 0.1), false);
  run("gradient_conventional_7l",
      make_conventional(7, 3, 3, lambda, gap, 0.1), false);
  run("gradient_mfsim", make_mfsim(3, 3, lambda, gap, 0.1), false);
  run("gradient_film_phases", make_film(3, 3, lambda, gap, 2.4e-3, 0.1), false);
  run("gradient_film_displacements",
      make_film(3, 3, lambda, gap, 2.4e-3, 0.1), true);
}

void check_unitarity(Harness& harness) {
  Rng rng(derive_seed(kValidationSeed, {1}));
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    PhaseProfile profile(64);
    for (int n = 0; n < 64; ++n) profile(n) = 2.0 * kPi * rng.next_double();
    const Eigen::MatrixXcd matrix = phase_matrix(profile);
    const Eigen::MatrixXcd defect =
        matrix * matrix.adjoint() - Eigen::MatrixXcd::Identity(64, 64);
    worst = std::max(worst, defect.cwiseAbs().maxCoeff());
  }
  std::ostringstream detail;
  detail << "max |Phi Phi^H - I|: " << worst;
  harness.record("phase_unitarity", worst < 1e-12, detail.str());
}

void check_mfsim_round_trip(Harness& harness) {
  Rng rng(derive_seed(kValidationSeed, {2}));
  const double alpha = 0.2;
  const double amplitude = traversal_amplitude(alpha, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXcd targets(8);
    for (int n = 0; n < 8; ++n) {
      double magnitude = rng.next_double();
      if (trial % 5 == 0 && n == 0) magnitude = 0.0;
      if (trial % 5 == 1 && n == 1) magnitude = 1.0;
      targets(n) = std::polar(magnitude, 2.0 * kPi * rng.next_double());
    }
    const auto [theta, phi] = mfsim_synthesize(targets, alpha);
    const Eigen::VectorXcd gains =
        mfsim_response(theta, phi, WiredTopology::adjacent(8), alpha);
    worst = std::max(worst,
                     (gains / amplitude - targets).cwiseAbs().maxCoeff());
  }
  std::ostringstream detail;
  detail << "max round-trip residual: " << worst;
  harness.record("mfsim_round_trip", worst < 1e-12, detail.str());
}

void check_brute_force(Harness& harness) {
  const double lambda = wavelength(28e9);
  const double gap = 5e-3;
  Rng rng(derive_seed(kValidationSeed, {3}));
  double worst = 0.0;
  for (int layers = 1; layers <= 3; ++layers) {
    const ArchitectureSpec spec =
        make_conventional(layers, 1, 3, lambda, gap, 0.15);
    const auto& conventional = std::get<ConventionalSpec>(spec.variant);
    std::vector<PhaseProfile> profiles;
    for (int l = 0; l < layers; ++l) {
      PhaseProfile profile(3);
      for (int n = 0; n < 3; ++n) profile(n) = 2.0 * kPi * rng.next_double();
      profiles.push_back(profile);
    }
    Eigen::MatrixXcd input(3, 2);
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 3; ++r) input(r, c) = rng.next_cgaussian(1.0);

    const Eigen::MatrixXcd fast =
        conventional_response(conventional, profiles, input, lambda, 0.15);

    // Naive sum over every propagation path.
    std::vector<Eigen::MatrixXcd> hops;
    for (int l = 0; l + 1 < layers; ++l)
      hops.push_back(build_coupling(conventional.layers[l],
                                    conventional.layers[l + 1], lambda));
    Eigen::MatrixXcd naive = Eigen::MatrixXcd::Zero(3, 2);
    for (int m = 0; m < 3; ++m)
      for (int f = 0; f < 2; ++f) {
        std::function<std::complex<double>(int, int)> paths =
            [&](int layer, int atom) -> std::complex<double> {
          const std::complex<double> shift = std::polar(1.0, profiles[layer](atom));
          if (layer == 0) return shift * input(atom, f);
          std::complex<double> sum = 0.0;
          for (int prev = 0; prev < 3; ++prev)
            sum += hops[layer - 1](atom, prev) * paths(layer - 1, prev);
          return shift * sum;
        };
        naive(m, f) = traversal_amplitude(0.15, layers) * paths(layers - 1, m);
      }
    worst = std::max(worst, (fast - naive).cwiseAbs().maxCoeff());
  }
  std::ostringstream detail;
  detail << "max |cascade - path sum|: " << worst;
  harness.record("brute_force_paths", worst < 1e-12, detail.str());
}

void check_awgn_oracle(Harness& harness) {
  bool passed = true;
  std::ostringstream detail;
  for (double gamma_db : {4.0, 8.0}) {
    const double gamma = std::pow(10.0, gamma_db / 10.0);
    // Unit diagonal channel with powers arranged to hit gamma_b exactly.
    Eigen::MatrixXcd effective(1, 1);
    effective(0, 0) = 1.0;
    const double noise_w = 1.0;
    const double tx_power_w = 2.0 * gamma * noise_w;
    const BerPoint point =
        ber_qpsk(effective, tx_power_w, noise_w,
                 derive_seed(kValidationSeed, {4, static_cast<std::uint64_t>(gamma_db)}),
                 {400, 2'000'000});
    const double expected = qpsk_awgn_oracle(gamma);
    const double bits = 2.0 * static_cast<double>(point.symbols);
    const double sigma = std::sqrt(std::max(expected * (1.0 - expected) / bits, 1e-300));
    const double offset = std::abs(point.average - expected) / sigma;
    detail << "gamma_b " << gamma_db << " dB: " << offset << " sigma; ";
    passed = passed && offset < 3.0;
  }
  harness.record("awgn_oracle", passed, detail.str());
}

void check_capacity_invariance(Harness& harness) {
  Rng rng(derive_seed(kValidationSeed, {5}));
  Eigen::MatrixXcd matrix(4, 6);
  for (int c = 0; c < 6; ++c)
    for (int r = 0; r < 4; ++r) matrix(r, c) = rng.next_cgaussian(1.0);
  Eigen::MatrixXcd noise_left(4, 4), noise_right(6, 6);
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) noise_left(r, c) = rng.next_cgaussian(1.0);
  for (int c = 0; c < 6; ++c)
    for (int r = 0; r < 6; ++r) noise_right(r, c) = rng.next_cgaussian(1.0);
  const Eigen::MatrixXcd q_left =
      Eigen::HouseholderQR<Eigen::MatrixXcd>(noise_left).householderQ();
  const Eigen::MatrixXcd q_right =
      Eigen::HouseholderQR<Eigen::MatrixXcd>(noise_right).householderQ();
  const double base = capacity(matrix, 2.0, 0.5, 4);
  const double rotated = capacity(q_left * matrix * q_right, 2.0, 0.5, 4);
  std::ostringstream detail;
  detail << "difference under unitary rotations: " << std::abs(base - rotated);
  harness.record("capacity_unitary_invariance", std::abs(base - rotated) < 1e-9,
                 detail.str());
}

void check_zero_forcing(Harness& harness) {
  const double lambda = wavelength(28e9);
  LayerGeometry aperture;
  aperture.rows = 10;
  aperture.cols = 10;
  aperture.atom_spacing = 0.5 * lambda;
  aperture.atom_area = 0.25 * lambda * lambda;
  aperture.z_offset = 10e-3;
  const Eigen::MatrixXcd channel = steering_channel_matrix(
      aperture, {-40.0, -15.0, 15.0, 40.0}, {0.0, 0.0, 0.0, 0.0}, lambda, 1.0);
  const Eigen::MatrixXcd product = channel * zf_targets(channel);
  double off_diag = 0.0;
  double diag_min = 1e300;
  for (int u = 0; u < 4; ++u) {
    diag_min = std::min(diag_min, std::abs(product(u, u)));
    for (int v = 0; v < 4; ++v)
      if (u != v) off_diag = std::max(off_diag, std::abs(product(u, v)));
  }
  std::ostringstream detail;
  detail << "max off-diagonal / min diagonal: " << off_diag / diag_min;
  harness.record("zero_forcing_residual", off_diag / diag_min < 1e-10,
                 detail.str());
}

void check_determinism(Harness& harness) {
  ExperimentConfig config = default_capacity_config();
  config.schemes = {SchemeId::kMimoDigital, SchemeId::kSim1L};
  config.sweep.stop = 0.2;
  config.sweep.step = 0.2;
  config.sweep.realizations = 2;
  config.optimizer.max_iters = 10;
  RunOptions serial;
  serial.workers = 1;
  RunOptions threaded;
  threaded.workers = 3;
  const std::string first = result_to_csv(run_capacity_vs_attenuation(config, serial));
  const std::string second =
      result_to_csv(run_capacity_vs_attenuation(config, threaded));
  harness.record("determinism_across_workers", first == second,
                 first == second ? "byte-identical CSV for 1 and 3 workers"
                                 : "CSV bytes differ between worker counts");
}

void check_required_power(Harness& harness) {
  // Synthetic curve from the analytic oracle: gamma_b(dB) = power(dBm) - 30.
  BerCurve curve;
  curve.power_dbm.resize(21);
  curve.ber.resize(21);
  for (int i = 0; i < 21; ++i) {
    curve.power_dbm(i) = 20.0 + i;
    const double gamma = std::pow(10.0, (curve.power_dbm(i) - 30.0) / 10.0);
    curve.ber(i) = qpsk_awgn_oracle(gamma);
  }
  const double recovered = required_power_at_ber(curve, 1e-5);
  // Analytic crossing: gamma_b = (erfc^-1(2e-5))^2 -> dB + 30.
  double low = 20.0, high = 41.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (low + high);
    const double value =
        qpsk_awgn_oracle(std::pow(10.0, (mid - 30.0) / 10.0));
    (value > 1e-5 ? low : high) = mid;
  }
  const double analytic = 0.5 * (low + high);
  std::ostringstream detail;
  detail << "interpolated " << recovered << " dBm vs analytic " << analytic;
  harness.record("required_power_interpolation",
                 std::abs(recovered - analytic) < 0.1, detail.str());
}

}  // namespace

std::vector<CheckResult> run_validation_suite(FaultInjection fault) {
  Harness harness{fault, {}};
  check_unitarity(harness);
  check_mfsim_round_trip(harness);
  check_gradients(harness);
  check_brute_force(harness);
  check_awgn_oracle(harness);
  check_capacity_invariance(harness);
  check_zero_forcing(harness);
  check_required_power(harness);
  check_determinism(harness);
  return harness.results;
}

}  // namespace simstack
