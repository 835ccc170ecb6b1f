// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <complex>

#include "simstack/propagation.hpp"
#include "simstack/rng.hpp"

using namespace simstack;

namespace {
const double kLambda28 = 299792458.0 / 28e9;
LayerGeometry half_wave_layer(int rows, int cols, double z) {
  return {rows, cols, 0.5 * kLambda28, 0.25 * kLambda28 * kLambda28, z};
}
}  // namespace

TEST_CASE("wavelength basics") {
  CHECK(wavelength(28e9) == doctest::Approx(0.0107068735).epsilon(1e-12));
  CHECK(wavelength(299792458.0) == 1.0);
  // Halving the frequency doubles the wavelength exactly (power-of-two scale).
  CHECK(wavelength(14e9) == 2.0 * wavelength(28e9));
  CHECK_THROWS_AS((void)wavelength(0.0), std::domain_error);
  CHECK_THROWS_AS((void)wavelength(-1.0), std::domain_error);
}

TEST_CASE("rs_coefficient on-axis value and symmetry") {
  const double area = 0.25 * kLambda28 * kLambda28;
  const std::complex<double> w =
      rs_coefficient({0, 0, 0}, {0, 0, 5e-3}, kLambda28, area);
  // Frozen from direct evaluation of the coefficient formula.
  CHECK(std::abs(w) == doctest::Approx(0.56558032075809439).epsilon(1e-12));
  CHECK(w.real() == doctest::Approx(-0.068299284014043157).epsilon(1e-9));
  CHECK(w.imag() == doctest::Approx(0.561441276565945).epsilon(1e-9));

  // Mirror-symmetric atom pairs about the stack axis couple identically.
  const auto w_left =
      rs_coefficient({-3e-3, 1e-3, 0}, {-1e-3, 2e-3, 5e-3}, kLambda28, area);
  const auto w_right =
      rs_coefficient({3e-3, -1e-3, 0}, {1e-3, -2e-3, 5e-3}, kLambda28, area);
  CHECK(std::abs(w_left) == doctest::Approx(std::abs(w_right)).epsilon(1e-14));

  // Swapping source and destination preserves the coefficient under the
  // |dz| angle convention.
  const Eigen::Vector3d a(1e-3, -2e-3, 0.0), b(-0.5e-3, 1e-3, 6e-3);
  CHECK(rs_coefficient(a, b, kLambda28, area) ==
        rs_coefficient(b, a, kLambda28, area));

  CHECK_THROWS_AS((void)rs_coefficient(a, a, kLambda28, area),
                  std::domain_error);
}

TEST_CASE("rs_coefficient far-term power law") {
  // With 1/(2 pi d) << 1/lambda the coupled power follows an inverse-square
  // law: doubling the distance costs a factor 4 in |w|^2 (a factor 2 in
  // amplitude).
  const double area = 0.25 * kLambda28 * kLambda28;
  const double d = 20.0 * kLambda28;
  const auto w1 = rs_coefficient({0, 0, 0}, {0, 0, d}, kLambda28, area);
  const auto w2 = rs_coefficient({0, 0, 0}, {0, 0, 2.0 * d}, kLambda28, area);
  CHECK(std::norm(w1) / std::norm(w2) == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("rs_coefficient_jet matches finite differences") {
  const double area = 0.25 * kLambda28 * kLambda28;
  const Eigen::Vector3d src(0.4e-3, -1.1e-3, 0.0);
  const Eigen::Vector3d dst(-0.8e-3, 2.0e-3, 5.2e-3);
  const RsCoefficientJet jet = rs_coefficient_jet(src, dst, kLambda28, area);
  CHECK(std::abs(jet.value - rs_coefficient(src, dst, kLambda28, area)) <
        1e-14 * std::abs(jet.value));
  const double h = 1e-9;
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::Vector3d up = dst, down = dst;
    up(axis) += h;
    down(axis) -= h;
    const std::complex<double> numeric =
        (rs_coefficient(src, up, kLambda28, area) -
         rs_coefficient(src, down, kLambda28, area)) /
        (2.0 * h);
    CHECK(std::abs(jet.d_dst(axis) - numeric) <=
          1e-6 * std::max(1.0, std::abs(numeric)));
  }
}

TEST_CASE("build_coupling degenerate and symmetric cases") {
  const double area = 0.25 * kLambda28 * kLambda28;
  LayerGeometry src = half_wave_layer(1, 1, 0.0);
  LayerGeometry dst = half_wave_layer(1, 1, 5e-3);
  const ComplexCoupling single = build_coupling(src, dst, kLambda28);
  REQUIRE(single.rows() == 1);
  REQUIRE(single.cols() == 1);
  CHECK(single(0, 0) == rs_coefficient(src.atom_position(0),
                                       dst.atom_position(0), kLambda28, area));

  // A mirror-symmetric source pair produces mirrored columns.
  LayerGeometry src_pair = half_wave_layer(1, 2, 0.0);
  LayerGeometry dst_pair = half_wave_layer(1, 2, 5e-3);
  const ComplexCoupling coupling = build_coupling(src_pair, dst_pair, kLambda28);
  CHECK(coupling(0, 0) == coupling(1, 1));
  CHECK(coupling(1, 0) == coupling(0, 1));

  CHECK_THROWS_AS((void)build_coupling(dst, src, kLambda28), std::domain_error);
  CHECK_THROWS_AS((void)build_coupling(src, src, kLambda28), std::domain_error);
}

TEST_CASE("build_coupling study-size regression") {
  LayerGeometry first = half_wave_layer(10, 10, 5e-3);
  LayerGeometry second = half_wave_layer(10, 10, 10e-3);
  const ComplexCoupling coupling = build_coupling(first, second, kLambda28);
  REQUIRE(coupling.rows() == 100);
  REQUIRE(coupling.cols() == 100);
  CHECK(coupling.allFinite());
  for (int n = 0; n < 100; ++n) CHECK(std::isfinite(coupling.col(n).norm()));
  // Frozen from direct evaluation.
  CHECK(coupling.norm() == doctest::Approx(8.6894418396967215).epsilon(1e-12));
}

TEST_CASE("path_loss anchor and monotonicity") {
  const double reference = kLambda28 / (4.0 * kPi);
  CHECK(path_loss(1.0, 2.5, kLambda28) ==
        doctest::Approx(reference * reference).epsilon(1e-15));
  // Frozen from direct evaluation at the study distance.
  CHECK(path_loss(150.0, 2.5, kLambda28) ==
        doctest::Approx(2.6343742186137257e-12).epsilon(1e-12));
  // Exact square law on a power-of-two distance ratio.
  CHECK(path_loss(2.0, 2.0, kLambda28) == 0.25 * path_loss(1.0, 2.0, kLambda28));

  double previous = path_loss(1.0, 2.5, kLambda28);
  for (double d : {2.0, 5.0, 20.0, 150.0, 1000.0}) {
    const double current = path_loss(d, 2.5, kLambda28);
    CHECK(current < previous);
    previous = current;
  }
  for (double d : {1.5, 10.0, 150.0}) {
    CHECK(path_loss(d, 3.0, kLambda28) < path_loss(d, 2.5, kLambda28));
    CHECK(path_loss(d, 2.5, kLambda28) < path_loss(d, 2.0, kLambda28));
  }
  CHECK_THROWS_AS((void)path_loss(0.99, 2.5, kLambda28), std::domain_error);
}

TEST_CASE("rayleigh_channel determinism and statistics") {
  const ChannelRealization a = rayleigh_channel(4, 7, 1.0, 1234);
  const ChannelRealization b = rayleigh_channel(4, 7, 1.0, 1234);
  CHECK(a.matrix == b.matrix);
  CHECK(rayleigh_channel(4, 7, 1.0, 1235).matrix != a.matrix);

  // 1e5 entries: the sample mean of |h|^2 sits within 1% of mean_power.
  const ChannelRealization big = rayleigh_channel(250, 400, 1.0, 20260808);
  const double mean_power = big.matrix.cwiseAbs2().mean();
  CHECK(mean_power > 0.99);
  CHECK(mean_power < 1.01);

  // Scaling mean_power by 4 scales every |h|^2 by exactly 4.
  const ChannelRealization scaled = rayleigh_channel(250, 400, 4.0, 20260808);
  CHECK(scaled.matrix.cwiseAbs2().mean() == 4.0 * mean_power);

  CHECK_THROWS_AS((void)rayleigh_channel(0, 1, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)rayleigh_channel(1, 1, 0.0, 1), std::invalid_argument);
}

TEST_CASE("steering_vector structure") {
  LayerGeometry layer = half_wave_layer(10, 10, 10e-3);

  const Eigen::VectorXcd broadside = steering_vector(0.0, 0.0, layer, kLambda28);
  REQUIRE(broadside.size() == 100);
  for (int n = 0; n < 100; ++n) {
    CHECK(std::abs(std::abs(broadside(n)) - 1.0) < 1e-12);
    CHECK(std::abs(broadside(n) - broadside(0)) < 1e-12);  // equal phase
  }

  const double az = 30.0 * kPi / 180.0;
  const Eigen::VectorXcd tilted = steering_vector(az, 0.0, layer, kLambda28);
  // Mirror conjugation holds on the z = 0 plane (no common z-phase term).
  LayerGeometry plane = layer;
  plane.z_offset = 0.0;
  const Eigen::VectorXcd forward = steering_vector(az, 0.0, plane, kLambda28);
  const Eigen::VectorXcd mirrored = steering_vector(-az, 0.0, plane, kLambda28);
  for (int n = 0; n < 100; ++n) {
    CHECK(std::abs(std::abs(tilted(n)) - 1.0) < 1e-12);
    CHECK(std::abs(mirrored(n) - std::conj(forward(n))) < 1e-12);
  }

  // Frozen regression: the 30-degree vector decorrelates from broadside.
  const double overlap = std::abs(tilted.dot(broadside));
  CHECK(overlap == doctest::Approx(14.142135623730955).epsilon(1e-10));
  CHECK(overlap < 100.0);
  CHECK(tilted(0).real() == doctest::Approx(-0.40376916929341444).epsilon(1e-9));
  CHECK(tilted(0).imag() == doctest::Approx(-0.91486089539782278).epsilon(1e-9));
}

TEST_CASE("feed_array_geometry layout") {
  const LayerGeometry feed = feed_array_geometry(4, kLambda28);
  CHECK(feed.rows == 1);
  CHECK(feed.cols == 4);
  CHECK(feed.atom_spacing == doctest::Approx(0.5 * kLambda28));
  CHECK(feed.z_offset == 0.0);
  // Centered: positions sum to zero.
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int n = 0; n < 4; ++n) sum += feed.atom_position(n);
  CHECK(sum.norm() < 1e-18);
}

TEST_CASE("rng streams are order-sensitive and reproducible") {
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));

  Rng rng_a(42), rng_b(42);
  for (int i = 0; i < 100; ++i) CHECK(rng_a.next_u64() == rng_b.next_u64());

  // Gaussian moments sanity.
  Rng rng(7);
  double sum = 0.0, sum2 = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double x = rng.next_gaussian();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / count) < 0.01);
  CHECK(sum2 / count == doctest::Approx(1.0).epsilon(0.01));
}
