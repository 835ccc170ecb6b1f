// SPDX-License-Identifier: Apache-2.0

#include "simstack/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "simstack/errors.hpp"
#include "simstack/rng.hpp"

namespace simstack {

void Scenario::validate() const {
  if (!std::isfinite(tx_power_dbm) || !std::isfinite(noise_dbm))
    throw std::invalid_argument("Scenario: powers must be finite");
  if (!(carrier_hz > 0.0))
    throw std::invalid_argument("Scenario: carrier_hz must be > 0");
  if (!(pathloss_exponent > 0.0))
    throw std::invalid_argument("Scenario: pathloss_exponent must be > 0");
  if (!(link_distance_m >= 1.0))
    throw std::invalid_argument("Scenario: link_distance_m must be >= 1");
  if (num_streams_or_users < 1)
    throw std::invalid_argument("Scenario: num_streams_or_users must be >= 1");
  if (!(attenuation_ratio >= 0.0 && attenuation_ratio < 1.0))
    throw std::invalid_argument("Scenario: attenuation_ratio must be in [0, 1)");
}

double dbm_to_watts(double dbm) {
  if (!std::isfinite(dbm))
    throw std::invalid_argument("dbm_to_watts: power must be finite");
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double capacity(const Eigen::MatrixXcd& effective, double tx_power_w,
                double noise_w, int streams) {
  if (!effective.allFinite())
    throw NumericalError("capacity: effective channel has non-finite entries");
  if (!(tx_power_w >= 0.0) || !(noise_w > 0.0))
    throw std::invalid_argument("capacity: powers out of range");
  const int max_streams =
      static_cast<int>(std::min(effective.rows(), effective.cols()));
  if (streams < 1 || streams > max_streams)
    throw std::invalid_argument(
        "capacity: streams must lie in [1, min(dimensions)]");

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(effective);
  const Eigen::VectorXd singular = svd.singularValues();  // decreasing
  const double per_stream = tx_power_w / streams;
  double bits = 0.0;
  for (int s = 0; s < streams; ++s) {
    const double snr = per_stream * singular(s) * singular(s) / noise_w;
    bits += std::log2(1.0 + snr);
  }
  return bits;
}

BerPoint ber_qpsk(const Eigen::MatrixXcd& effective_per_user,
                  double tx_power_w, double noise_w, std::uint64_t seed,
                  const StoppingRule& stop) {
  if (effective_per_user.rows() != effective_per_user.cols())
    throw std::invalid_argument("ber_qpsk: effective matrix must be square");
  if (!(tx_power_w > 0.0) || !(noise_w > 0.0))
    throw std::invalid_argument("ber_qpsk: powers must be > 0");
  if (stop.min_errors < 1 || stop.max_symbols < 1)
    throw std::invalid_argument("ber_qpsk: stopping rule out of range");

  const int users = static_cast<int>(effective_per_user.rows());
  const double symbol_amplitude = std::sqrt(tx_power_w / users);
  const Eigen::MatrixXcd scaled = symbol_amplitude * effective_per_user;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  // Fixed batch size keeps the draw order (and therefore the result)
  // independent of the stopping point within a batch.
  constexpr long long kBatch = 4096;

  Rng rng(seed);
  Eigen::MatrixXcd symbols(users, kBatch);
  Eigen::MatrixXcd received(users, kBatch);
  Eigen::ArrayXd uniform_a, uniform_b, radius;
  std::vector<unsigned char> bits(static_cast<std::size_t>(users) * kBatch * 2);
  std::vector<long long> errors(users, 0);
  long long total_errors = 0;
  long long slots = 0;

  while (slots < stop.max_symbols && total_errors < stop.min_errors) {
    const long long batch = std::min(kBatch, stop.max_symbols - slots);
    // Draw transmit bits, two per user per slot, slot-major.
    std::uint64_t word = 0;
    int bits_left = 0;
    for (long long j = 0; j < batch; ++j) {
      for (int u = 0; u < users; ++u) {
        if (bits_left < 2) {
          word = rng.next_u64();
          bits_left = 64;
        }
        const unsigned b0 = static_cast<unsigned>(word & 1u);
        const unsigned b1 = static_cast<unsigned>((word >> 1) & 1u);
        word >>= 2;
        bits_left -= 2;
        const std::size_t base = 2 * (static_cast<std::size_t>(j) * users + u);
        bits[base] = static_cast<unsigned char>(b0);
        bits[base + 1] = static_cast<unsigned char>(b1);
        symbols(u, j) = {inv_sqrt2 * (1.0 - 2.0 * static_cast<double>(b0)),
                         inv_sqrt2 * (1.0 - 2.0 * static_cast<double>(b1))};
      }
    }
    received.leftCols(batch).noalias() = scaled * symbols.leftCols(batch);
    // Box-Muller noise, batched: same draw order and arithmetic as
    // Rng::next_cgaussian (uniform pair per sample, sample index slot-major),
    // with the log/sqrt stage vectorized and sincos fused.
    {
      const Eigen::Index count = static_cast<Eigen::Index>(batch) * users;
      uniform_a.resize(count);
      uniform_b.resize(count);
      for (Eigen::Index k = 0; k < count; ++k) {
        uniform_a(k) = rng.next_open_double();
        uniform_b(k) = rng.next_double();
      }
      radius = (-2.0 * uniform_a.log()).sqrt() * std::sqrt(noise_w * 0.5);
      constexpr double kTwoPi = 6.283185307179586476925286766559;
      Eigen::Index k = 0;
      for (long long j = 0; j < batch; ++j)
        for (int u = 0; u < users; ++u, ++k) {
          double sine = 0.0, cosine = 0.0;
          ::sincos(kTwoPi * uniform_b(k), &sine, &cosine);
          received(u, j) += std::complex<double>(radius(k) * cosine,
                                                 radius(k) * sine);
        }
    }

    for (int u = 0; u < users; ++u) {
      const std::complex<double> derotate = std::conj(scaled(u, u));
      for (long long j = 0; j < batch; ++j) {
        const std::complex<double> z = received(u, j) * derotate;
        const std::size_t base = 2 * (static_cast<std::size_t>(j) * users + u);
        const unsigned det0 = z.real() < 0.0 ? 1u : 0u;
        const unsigned det1 = z.imag() < 0.0 ? 1u : 0u;
        const long long wrong = (det0 != bits[base]) + (det1 != bits[base + 1]);
        errors[u] += wrong;
        total_errors += wrong;
      }
    }
    slots += batch;
  }

  BerPoint point;
  point.symbols = slots;
  point.per_user.resize(users);
  for (int u = 0; u < users; ++u)
    point.per_user(u) =
        static_cast<double>(errors[u]) / (2.0 * static_cast<double>(slots));
  point.average = point.per_user.mean();
  return point;
}

double qpsk_awgn_oracle(double gamma_b) {
  if (!(gamma_b >= 0.0))
    throw std::domain_error("qpsk_awgn_oracle: gamma_b must be >= 0");
  // Q(sqrt(2 x)) == erfc(sqrt(x)) / 2
  return 0.5 * std::erfc(std::sqrt(gamma_b));
}

}  // namespace simstack
