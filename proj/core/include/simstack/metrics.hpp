// SPDX-License-Identifier: Apache-2.0
//
// Link-level performance metrics: equal-power channel capacity, Monte Carlo
// QPSK bit-error rate with a per-user matched detector, and the analytic AWGN
// BER reference.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace simstack {

/// Radio parameters of one study. num_streams_or_users counts data streams
/// in point-to-point runs and receivers in multi-user runs.
struct Scenario {
  double carrier_hz = 28e9;
  double tx_power_dbm = 20.0;
  double noise_dbm = -110.0;
  double pathloss_exponent = 2.5;
  double link_distance_m = 150.0;
  int num_streams_or_users = 4;
  double attenuation_ratio = 0.0;

  void validate() const;
};

/// Monte Carlo stopping rule: stop at min_errors accumulated bit errors
/// (summed over users) or max_symbols vector symbols, whichever is first.
struct StoppingRule {
  long long min_errors = 200;
  long long max_symbols = 10'000'000;
};

struct BerPoint {
  Eigen::VectorXd per_user;  // bit-error rate per user
  double average = 0.0;      // arithmetic mean over users
  long long symbols = 0;     // vector symbols simulated
};

/// One measured BER-versus-power curve.
struct BerCurve {
  Eigen::VectorXd power_dbm;
  Eigen::VectorXd ber;
  std::vector<long long> symbols;
  std::uint64_t seed = 0;
};

/// 10^((p - 30) / 10).
double dbm_to_watts(double dbm);

/// Equal-power-per-stream capacity of an effective channel in bits/s/Hz:
///   C = sum_{s=1..streams} log2(1 + (P/streams) sigma_s^2 / N0)
/// over the top `streams` singular values.
double capacity(const Eigen::MatrixXcd& effective, double tx_power_w,
                double noise_w, int streams);

/// Monte Carlo Gray-coded QPSK over a square effective channel. Each user
/// transmits at tx_power_w / users; the receiver derotates by the diagonal
/// entry and treats off-diagonal terms as interference. Deterministic in
/// seed: the symbol/noise stream and the batch layout are fixed.
BerPoint ber_qpsk(const Eigen::MatrixXcd& effective_per_user,
                  double tx_power_w, double noise_w, std::uint64_t seed,
                  const StoppingRule& stop);

/// Analytic QPSK-over-AWGN bit-error rate at per-bit SNR gamma_b:
/// Q(sqrt(2 gamma_b)).
double qpsk_awgn_oracle(double gamma_b);

}  // namespace simstack
