// SPDX-License-Identifier: Apache-2.0
//
// Batch front end. Exit codes are a stable contract:
//   0  success
//   1  validation failure (a built-in check did not pass)
//   2  configuration error (bad config file, bad flags, infeasible input)
//   3  runtime or numerical failure

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simstack/architectures.hpp"
#include "simstack/errors.hpp"
#include "simstack/experiments.hpp"
#include "simstack/validation.hpp"
#include "simstack/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  int workers = 0;
};

void add_common_flags(CLI::App* command, CommonFlags& flags,
                      bool needs_config = true) {
  if (needs_config)
    command->add_option("--config", flags.config_path, "experiment config file")
        ->required();
  command->add_option("--out", flags.out_dir, "output directory")->required();
  command
      ->add_option_function<std::uint64_t>(
          "--seed",
          [&flags](std::uint64_t value) { flags.seed_override = value; },
          "override the config master seed")
      ->expected(1);
  command->add_option("--workers", flags.workers,
                      "worker threads (default: hardware concurrency); never "
                      "affects results");
}

int run_experiment_command(const CommonFlags& flags,
                           const std::optional<double>& sweep_from,
                           const std::optional<double>& sweep_to,
                           const std::optional<double>& sweep_step,
                           const std::optional<int>& sweep_realizations) {
  simstack::ExperimentConfig config =
      simstack::load_config_file(flags.config_path);
  if (sweep_from) config.sweep.start = *sweep_from;
  if (sweep_to) config.sweep.stop = *sweep_to;
  if (sweep_step) config.sweep.step = *sweep_step;
  if (sweep_realizations) config.sweep.realizations = *sweep_realizations;

  simstack::RunOptions options;
  options.workers = flags.workers;
  options.seed_override = flags.seed_override;

  simstack::ExperimentConfig resolved = config;
  if (options.seed_override) resolved.master_seed = *options.seed_override;
  resolved.validate();

  const simstack::ExperimentResult result =
      simstack::run_experiment(resolved, options);
  const simstack::ArtifactPaths paths =
      simstack::write_experiment_artifacts(result, resolved, flags.out_dir);
  std::cout << "wrote " << paths.csv << "\n";
  std::cout << "wrote " << paths.metadata << "\n";
  std::cout << "config digest " << result.config_digest << "\n";
  return kExitOk;
}

int run_synthesize(const std::string& targets_path, const std::string& out_dir,
                   double alpha) {
  std::ifstream input(targets_path);
  if (!input)
    throw simstack::ConfigError("targets",
                                "cannot open file '" + targets_path + "'");
  std::vector<std::complex<double>> targets;
  std::string line;
  int line_number = 0;
  while (std::getline(input, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double re = 0.0, im = 0.0;
    if (!(fields >> re >> im))
      throw simstack::ConfigError(
          "targets", "line " + std::to_string(line_number) +
                         ": expected 're im' per target");
    targets.emplace_back(re, im);
  }
  if (targets.empty())
    throw simstack::ConfigError("targets", "no targets found");

  Eigen::VectorXcd target_vector(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t n = 0; n < targets.size(); ++n)
    target_vector(static_cast<Eigen::Index>(n)) = targets[n];

  const auto [theta, phi] = simstack::mfsim_synthesize(target_vector, alpha);
  const Eigen::VectorXcd gains = simstack::mfsim_response(
      theta, phi, simstack::WiredTopology::adjacent(target_vector.size()),
      alpha);
  const double amplitude = simstack::traversal_amplitude(alpha, 2);
  const double residual =
      (gains / amplitude - target_vector).cwiseAbs().maxCoeff();

  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / "mfsim_phases.txt").string();
  std::ofstream output(path, std::ios::binary);
  if (!output)
    throw std::runtime_error("cannot write phases file: " + path);
  output << "# meta-fiber stack phases: theta_a theta_b phi (radians)\n";
  output << "# alpha = " << alpha << "\n";
  char buffer[96];
  for (Eigen::Index n = 0; n < target_vector.size(); ++n) {
    std::snprintf(buffer, sizeof(buffer), "%.17g %.17g %.17g\n", theta(2 * n),
                  theta(2 * n + 1), phi(n));
    output << buffer;
  }
  output.close();

  std::cout << "wrote " << path << "\n";
  std::cout << "round-trip max residual " << residual << "\n";
  return kExitOk;
}

int run_validate(const std::string& inject_fault) {
  simstack::FaultInjection fault = simstack::FaultInjection::kNone;
  if (inject_fault == "gradient")
    fault = simstack::FaultInjection::kGradient;
  else if (!inject_fault.empty())
    throw simstack::ConfigError("--inject-fault",
                                "unknown fault '" + inject_fault + "'");

  const std::vector<simstack::CheckResult> checks =
      simstack::run_validation_suite(fault);
  bool all_passed = true;
  for (const auto& check : checks) {
    std::cout << (check.passed ? "PASS" : "FAIL") << "  " << check.name << " ("
              << check.detail << ")\n";
    all_passed = all_passed && check.passed;
  }
  std::cout << (all_passed ? "all checks passed" : "validation failed") << "\n";
  return all_passed ? kExitOk : kExitValidationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stacked-metasurface front-end simulator and optimizer"};
  app.set_version_flag("--version", simstack::kVersion);
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run the experiment described by a config");
  add_common_flags(run_cmd, run_flags);

  CommonFlags sweep_flags;
  std::optional<double> sweep_from, sweep_to, sweep_step;
  std::optional<int> sweep_realizations;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "run a config with the sweep grid overridden from flags");
  add_common_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option_function<double>(
      "--from", [&](double v) { sweep_from = v; }, "sweep start")->required();
  sweep_cmd->add_option_function<double>(
      "--to", [&](double v) { sweep_to = v; }, "sweep stop")->required();
  sweep_cmd->add_option_function<double>(
      "--step", [&](double v) { sweep_step = v; }, "sweep step")->required();
  sweep_cmd->add_option_function<int>(
      "--realizations", [&](int v) { sweep_realizations = v; },
      "override realization count");

  std::string targets_path;
  std::string synth_out;
  double synth_alpha = 0.0;
  CLI::App* synth_cmd = app.add_subcommand(
      "synthesize",
      "solve meta-fiber phases realizing per-atom complex gains");
  synth_cmd->add_option("--targets", targets_path,
                        "text file, one 're im' gain per line")
      ->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--alpha", synth_alpha,
                        "per-layer power attenuation ratio");

  std::string inject_fault;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "run the built-in invariant suite");
  validate_cmd->add_option("--inject-fault", inject_fault,
                           "test hook: force a named check to fail")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    if (error.get_exit_code() == 0) return app.exit(error);  // --help/--version
    app.exit(error);
    return kExitConfigError;
  }

  try {
    if (run_cmd->parsed())
      return run_experiment_command(run_flags, std::nullopt, std::nullopt,
                                    std::nullopt, std::nullopt);
    if (sweep_cmd->parsed())
      return run_experiment_command(sweep_flags, sweep_from, sweep_to,
                                    sweep_step, sweep_realizations);
    if (synth_cmd->parsed())
      return run_synthesize(targets_path, synth_out, synth_alpha);
    if (validate_cmd->parsed()) return run_validate(inject_fault);
  } catch (const simstack::ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return kExitConfigError;
  } catch (const simstack::InfeasibleAmplitudeError& error) {
    std::cerr << "config error: " << error.what() << "; indices:";
    for (int index : error.indices()) std::cerr << ' ' << index;
    std::cerr << "\n";
    return kExitConfigError;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
