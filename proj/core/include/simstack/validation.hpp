// SPDX-License-Identifier: Apache-2.0
//
// Built-in invariant suite behind the `validate` subcommand: gradient checks
// against central finite differences, the analytic AWGN BER reference,
// unitarity and synthesis round trips, small-instance brute force, and a
// determinism probe across worker counts. Deterministic and fast (seconds).

#pragma once

#include <string>
#include <vector>

namespace simstack {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Test hook: corrupts the analytic gradient before comparison so the
/// gradient checks must fail. Never used outside the validation harness.
enum class FaultInjection { kNone, kGradient };

std::vector<CheckResult> run_validation_suite(
    FaultInjection fault = FaultInjection::kNone);

}  // namespace simstack
