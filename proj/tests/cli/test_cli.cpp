// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line front end: exit codes, artifact
// emission, reproducibility, synthesis round trips, and the validate suite
// (including its fault-injection harness).

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& arguments) {
  const fs::path dir = fs::temp_directory_path() / "simstack_cli_test";
  fs::create_directories(dir);
  static int counter = 0;
  const fs::path log = dir / ("log_" + std::to_string(counter++) + ".txt");
  const std::string command = std::string(SIMSTACK_CLI_PATH) + " " + arguments +
                              " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream stream(log);
  std::stringstream buffer;
  buffer << stream.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string write_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "simstack_cli_test";
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream stream(path, std::ios::binary);
  stream << content;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  std::stringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

std::string tiny_capacity_config() {
  return R"cfg(
[scenario]
carrier_hz = 28e9
tx_power_dbm = 20
noise_dbm = -110
pathloss_exponent = 2.5
link_distance_m = 150
num_streams_or_users = 2
attenuation_ratio = 0

[schemes]
enabled = MIMO_DIGITAL, SIM_1L

[sweep]
variable = attenuation_ratio
start = 0
stop = 0.2
step = 0.1
realizations = 2

[optimizer]
step_size = 0.2
max_iters = 12
tolerance = 1e-6
restarts = 1

[seeds]
master_seed = 99
)cfg";
}

}  // namespace

TEST_CASE("run emits reproducible artifacts") {
  const std::string config = write_file("capacity.cfg", tiny_capacity_config());
  const fs::path out_a = fs::temp_directory_path() / "simstack_cli_test/out_a";
  const fs::path out_b = fs::temp_directory_path() / "simstack_cli_test/out_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  const CommandResult first = run_cli("run --config " + config + " --out " +
                                      out_a.string() + " --workers 1");
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("wrote") != std::string::npos);

  const CommandResult second = run_cli("run --config " + config + " --out " +
                                       out_b.string() + " --workers 3");
  CHECK(second.exit_code == 0);

  const std::string csv_a = read_file((out_a / "attenuation_ratio.csv").string());
  const std::string csv_b = read_file((out_b / "attenuation_ratio.csv").string());
  REQUIRE(!csv_a.empty());
  CHECK(csv_a == csv_b);  // worker count never changes bytes
  CHECK(csv_a.rfind("sweep_value,scheme,metric,value,realizations,seed\n", 0) ==
        0);

  const std::string metadata =
      read_file((out_a / "attenuation_ratio_metadata.json").string());
  CHECK(metadata.find("config_digest") != std::string::npos);
  CHECK(metadata.find("canonical_config") != std::string::npos);

  // A seed override changes the result and is recorded.
  const fs::path out_c = fs::temp_directory_path() / "simstack_cli_test/out_c";
  const CommandResult reseeded =
      run_cli("run --config " + config + " --out " + out_c.string() +
              " --seed 123456 --workers 2");
  CHECK(reseeded.exit_code == 0);
  const std::string csv_c = read_file((out_c / "attenuation_ratio.csv").string());
  CHECK(csv_c != csv_a);
  CHECK(csv_c.find(",123456\n") != std::string::npos);
}

TEST_CASE("sweep overrides the grid") {
  const std::string config = write_file("capacity.cfg", tiny_capacity_config());
  const fs::path out = fs::temp_directory_path() / "simstack_cli_test/out_sweep";
  fs::remove_all(out);
  const CommandResult result =
      run_cli("sweep --config " + config + " --out " + out.string() +
              " --from 0 --to 0.3 --step 0.3 --realizations 1 --workers 2");
  CHECK(result.exit_code == 0);
  const std::string csv = read_file((out / "attenuation_ratio.csv").string());
  // Two sweep points, two schemes.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
}

TEST_CASE("config errors exit 2 and name the field") {
  const std::string config = write_file(
      "broken.cfg", tiny_capacity_config() + "\n[sweep]\nbananas = 4\n");
  const CommandResult result =
      run_cli("run --config " + config + " --out /tmp/simstack_cli_test/out_x");
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("sweep.bananas") != std::string::npos);

  const CommandResult missing = run_cli(
      "run --config /tmp/simstack_cli_test/nope.cfg --out /tmp/simstack_cli_test/out_y");
  CHECK(missing.exit_code == 2);
}

TEST_CASE("synthesize writes phases and reports the round trip") {
  const std::string ones = write_file("targets_ones.txt", "1 0\n1 0\n1 0\n");
  const fs::path out = fs::temp_directory_path() / "simstack_cli_test/synth";
  fs::remove_all(out);
  const CommandResult result =
      run_cli("synthesize --targets " + ones + " --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("round-trip max residual") != std::string::npos);
  const std::string phases = read_file((out / "mfsim_phases.txt").string());
  std::istringstream lines(phases);
  std::string line;
  int data_rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++data_rows;
    std::istringstream fields(line);
    double theta_a = 1.0, theta_b = 1.0, phi = 1.0;
    fields >> theta_a >> theta_b >> phi;
    // All-ones targets need zero phases everywhere.
    CHECK(std::abs(theta_a) < 1e-12);
    CHECK(std::abs(theta_b) < 1e-12);
    CHECK(std::abs(phi) < 1e-12);
  }
  CHECK(data_rows == 3);

  const std::string infeasible =
      write_file("targets_bad.txt", "0.5 0\n1.1 0.3\n");
  const CommandResult rejected =
      run_cli("synthesize --targets " + infeasible + " --out " + out.string());
  CHECK(rejected.exit_code == 2);
  CHECK(rejected.output.find("1") != std::string::npos);  // offending index
}

TEST_CASE("validate passes clean and fails under fault injection") {
  const CommandResult clean = run_cli("validate");
  CHECK(clean.exit_code == 0);
  CHECK(clean.output.find("FAIL") == std::string::npos);
  CHECK(clean.output.find("gradient_conventional_7l") != std::string::npos);

  const CommandResult injected = run_cli("validate --inject-fault gradient");
  CHECK(injected.exit_code == 1);
  CHECK(injected.output.find("FAIL  gradient_") != std::string::npos);
}
