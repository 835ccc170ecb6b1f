// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace simstack {

/// Invalid or inconsistent configuration input. Carries the offending field
/// path ("section.key") so batch tools can report it verbatim.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field_path, const std::string& message)
      : std::runtime_error(field_path + ": " + message),
        field_path_(std::move(field_path)) {}

  const std::string& field_path() const noexcept { return field_path_; }

 private:
  std::string field_path_;
};

/// Non-finite objective, diverged iteration, or similar numeric failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A synthesis target magnitude exceeds what a passive two-phasor sum can
/// realize (|t| > 1). Lists the offending target indices.
class InfeasibleAmplitudeError : public std::domain_error {
 public:
  InfeasibleAmplitudeError(std::string message, std::vector<int> indices)
      : std::domain_error(std::move(message)), indices_(std::move(indices)) {}

  const std::vector<int>& indices() const noexcept { return indices_; }

 private:
  std::vector<int> indices_;
};

/// The user channel matrix is rank deficient; no zero-forcing solution.
class SingularChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A BER curve never reaches the requested target level.
class UnreachableTargetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace simstack
