// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>

#include "simstack/architectures.hpp"
#include "simstack/cascade.hpp"
#include "simstack/errors.hpp"
#include "simstack/rng.hpp"

using namespace simstack;

namespace {
const double kLambda = 299792458.0 / 28e9;

LayerGeometry half_wave_layer(int rows, int cols, double z) {
  return {rows, cols, 0.5 * kLambda, 0.25 * kLambda * kLambda, z};
}

PhaseProfile random_phases(int count, std::uint64_t seed) {
  Rng rng(seed);
  PhaseProfile profile(count);
  for (int n = 0; n < count; ++n) profile(n) = 2.0 * kPi * rng.next_double();
  return profile;
}
}  // namespace

TEST_CASE("phase_matrix is unitary and matches special cases") {
  const Eigen::MatrixXcd identity = phase_matrix(PhaseProfile::Zero(5));
  CHECK((identity - Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() <
        1e-15);

  const Eigen::MatrixXcd negated =
      phase_matrix(PhaseProfile::Constant(5, kPi));
  CHECK((negated + Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() <
        1e-12);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::MatrixXcd matrix = phase_matrix(random_phases(16, seed));
    const Eigen::MatrixXcd defect =
        matrix * matrix.adjoint() - Eigen::MatrixXcd::Identity(16, 16);
    CHECK(defect.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("wrap_phases lands in [0, 2pi)") {
  PhaseProfile raw(4);
  raw << -0.5, 7.0, 2.0 * kPi, -13.0;
  const PhaseProfile wrapped = wrap_phases(raw);
  for (int n = 0; n < 4; ++n) {
    CHECK(wrapped(n) >= 0.0);
    CHECK(wrapped(n) < 2.0 * kPi);
    const std::complex<double> diff =
        std::polar(1.0, wrapped(n)) - std::polar(1.0, raw(n));
    CHECK(std::abs(diff) < 1e-12);
  }
}

TEST_CASE("wired topology validation") {
  const WiredTopology adjacent = WiredTopology::adjacent(5);
  CHECK_NOTHROW(adjacent.validate());
  CHECK(adjacent.first_layer_count() == 10);

  WiredTopology duplicate = adjacent;
  duplicate.pairs[1] = {0, 3};  // atom 0 reused
  CHECK_THROWS_AS(duplicate.validate(), std::invalid_argument);

  WiredTopology self_pair = adjacent;
  self_pair.pairs[2] = {4, 4};
  CHECK_THROWS_AS(self_pair.validate(), std::invalid_argument);
}

TEST_CASE("conventional_response single layer and attenuation scaling") {
  const ArchitectureSpec one = make_conventional(1, 1, 3, kLambda, 5e-3, 0.0);
  const auto& spec1 = std::get<ConventionalSpec>(one.variant);
  const PhaseProfile phases = random_phases(3, 9);
  const Eigen::MatrixXcd response = conventional_response(
      spec1, {phases}, Eigen::MatrixXcd::Identity(3, 3), kLambda, 0.0);
  CHECK((response - phase_matrix(phases)).cwiseAbs().maxCoeff() < 1e-15);

  // Frobenius norm scales exactly by sqrt(1-alpha)^L when only alpha moves.
  const ArchitectureSpec seven = make_conventional(7, 2, 2, kLambda, 5e-3, 0.0);
  const auto& spec7 = std::get<ConventionalSpec>(seven.variant);
  std::vector<PhaseProfile> profiles;
  for (int l = 0; l < 7; ++l) profiles.push_back(random_phases(4, 100 + l));
  Eigen::MatrixXcd input(4, 2);
  Rng rng(55);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 4; ++r) input(r, c) = rng.next_cgaussian(1.0);
  const double lossless =
      conventional_response(spec7, profiles, input, kLambda, 0.0).norm();
  const double attenuated =
      conventional_response(spec7, profiles, input, kLambda, 0.19).norm();
  CHECK(attenuated / lossless ==
        doctest::Approx(traversal_amplitude(0.19, 7)).epsilon(1e-12));
  CHECK(traversal_amplitude(0.19, 7) ==
        doctest::Approx(std::pow(0.81, 3.5)).epsilon(1e-14));

  // Two zero-phase layers collapse to (1 - alpha) W2 W1.
  const ArchitectureSpec two = make_conventional(2, 2, 2, kLambda, 5e-3, 0.3);
  const auto& spec2 = std::get<ConventionalSpec>(two.variant);
  const Eigen::MatrixXcd direct =
      (1.0 - 0.3) *
      build_coupling(spec2.layers[0], spec2.layers[1], kLambda) * input;
  const Eigen::MatrixXcd via_model = conventional_response(
      spec2, {PhaseProfile::Zero(4), PhaseProfile::Zero(4)}, input, kLambda,
      0.3);
  CHECK((direct - via_model).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(
      (void)conventional_response(spec2, {PhaseProfile::Zero(4)}, input,
                                  kLambda, 0.0),
      std::invalid_argument);
}

TEST_CASE("conventional_response equals naive path summation") {
  // Independent oracle: accumulate every propagation path through the stack.
  Rng rng(77);
  for (int layers = 1; layers <= 3; ++layers) {
    for (int atoms : {1, 2, 3}) {
      const ArchitectureSpec arch =
          make_conventional(layers, 1, atoms, kLambda, 5e-3, 0.1);
      const auto& spec = std::get<ConventionalSpec>(arch.variant);
      std::vector<PhaseProfile> profiles;
      for (int l = 0; l < layers; ++l)
        profiles.push_back(random_phases(atoms, 500 + 10 * layers + l));
      Eigen::MatrixXcd input(atoms, 2);
      for (int c = 0; c < 2; ++c)
        for (int r = 0; r < atoms; ++r) input(r, c) = rng.next_cgaussian(1.0);

      std::vector<Eigen::MatrixXcd> hops;
      for (int l = 0; l + 1 < layers; ++l)
        hops.push_back(
            build_coupling(spec.layers[l], spec.layers[l + 1], kLambda));

      Eigen::MatrixXcd naive = Eigen::MatrixXcd::Zero(atoms, 2);
      for (int m = 0; m < atoms; ++m)
        for (int f = 0; f < 2; ++f) {
          std::function<std::complex<double>(int, int)> paths =
              [&](int layer, int atom) -> std::complex<double> {
            const std::complex<double> shift =
                std::polar(1.0, profiles[layer](atom));
            if (layer == 0) return shift * input(atom, f);
            std::complex<double> total = 0.0;
            for (int previous = 0; previous < atoms; ++previous)
              total += hops[layer - 1](atom, previous) * paths(layer - 1, previous);
            return shift * total;
          };
          naive(m, f) = traversal_amplitude(0.1, layers) * paths(layers - 1, m);
        }

      const Eigen::MatrixXcd fast =
          conventional_response(spec, profiles, input, kLambda, 0.1);
      CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("mfsim_response combining") {
  const WiredTopology topology = WiredTopology::adjacent(1);

  PhaseProfile theta(2), phi(1);
  theta << 0.0, 0.0;
  phi << 0.0;
  CHECK(std::abs(mfsim_response(theta, phi, topology, 0.0)(0) - 1.0) < 1e-15);

  theta << 1.3, 1.3 + kPi;  // opposite phasors cancel
  phi << 0.7;
  CHECK(std::abs(mfsim_response(theta, phi, topology, 0.0)(0)) < 1e-15);

  theta << 2.0 * kPi / 3.0, 0.0;
  phi << 0.0;
  const std::complex<double> gain = mfsim_response(theta, phi, topology, 0.0)(0);
  CHECK(std::abs(gain) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::arg(gain) == doctest::Approx(kPi / 3.0).epsilon(1e-12));

  // Amplitude bound: |g| <= 1 - alpha always.
  Rng rng(5);
  const WiredTopology wide = WiredTopology::adjacent(32);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = 0.31;
    const Eigen::VectorXcd gains =
        mfsim_response(random_phases(64, 900 + trial),
                       random_phases(32, 1900 + trial), wide, alpha);
    CHECK(gains.cwiseAbs().maxCoeff() <= (1.0 - alpha) + 1e-12);
  }

  PhaseProfile bad_theta(3);
  CHECK_THROWS_AS((void)mfsim_response(bad_theta, phi, topology, 0.0),
                  std::invalid_argument);
}

TEST_CASE("mfsim_synthesize closed form and round trip") {
  const double alpha = 0.2;
  const double amp = traversal_amplitude(alpha, 2);

  Eigen::VectorXcd simple(1);
  simple << 1.0;
  auto [theta_one, phi_one] = mfsim_synthesize(simple, alpha);
  CHECK(theta_one(0) == doctest::Approx(0.0));
  CHECK(theta_one(1) == doctest::Approx(0.0));

  simple << 0.0;
  auto [theta_zero, phi_zero] = mfsim_synthesize(simple, alpha);
  const Eigen::VectorXcd zero_gain = mfsim_response(
      theta_zero, phi_zero, WiredTopology::adjacent(1), alpha);
  CHECK(std::abs(zero_gain(0)) < 1e-12);

  simple << std::polar(0.5, kPi / 3.0);
  auto [theta_half, phi_half] = mfsim_synthesize(simple, alpha);
  CHECK(theta_half(0) == doctest::Approx(2.0 * kPi / 3.0).epsilon(1e-12));
  // theta_b is 0 up to the 2 pi wrap.
  CHECK(std::abs(std::polar(1.0, theta_half(1)) - 1.0) < 1e-12);

  // Property: synthesize then respond reproduces any feasible target,
  // including the |t| = 0 and |t| = 1 edges.
  Rng rng(31);
  const WiredTopology topology = WiredTopology::adjacent(24);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::VectorXcd targets(24);
    for (int n = 0; n < 24; ++n) {
      double magnitude = rng.next_double();
      if (n == 0) magnitude = 0.0;
      if (n == 1) magnitude = 1.0;
      targets(n) = std::polar(magnitude, 2.0 * kPi * rng.next_double());
    }
    auto [theta, phi] = mfsim_synthesize(targets, alpha);
    const Eigen::VectorXcd gains = mfsim_response(theta, phi, topology, alpha);
    CHECK((gains / amp - targets).cwiseAbs().maxCoeff() < 1e-12);
  }

  Eigen::VectorXcd infeasible(3);
  infeasible << 0.5, std::polar(1.2, 0.3), 0.9;
  try {
    (void)mfsim_synthesize(infeasible, alpha);
    FAIL("expected InfeasibleAmplitudeError");
  } catch (const InfeasibleAmplitudeError& error) {
    REQUIRE(error.indices().size() == 1);
    CHECK(error.indices()[0] == 1);
  }
}

TEST_CASE("film_response reductions and displacement behavior") {
  const ArchitectureSpec arch = make_film(3, 3, kLambda, 5e-3, 2.4e-3, 0.17);
  const auto& film = std::get<FilmSpec>(arch.variant);
  const std::array<PhaseProfile, 2> profiles = {random_phases(9, 3),
                                                random_phases(9, 4)};
  Eigen::MatrixXcd input(9, 2);
  Rng rng(8);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 9; ++r) input(r, c) = rng.next_cgaussian(1.0);

  const std::array<DisplacementProfile, 2> zeros = {
      DisplacementProfile::zeros(9, 2.4e-3), DisplacementProfile::zeros(9, 2.4e-3)};

  // Zero displacements reproduce the two-layer rigid stack bit for bit.
  ConventionalSpec rigid;
  rigid.layers = {film.layers[0], film.layers[1]};
  rigid.inter_layer_gap = 5e-3;
  const Eigen::MatrixXcd from_film =
      film_response(film, profiles, zeros, input, kLambda, 0.17);
  const Eigen::MatrixXcd from_rigid = conventional_response(
      rigid, {profiles[0], profiles[1]}, input, kLambda, 0.17);
  CHECK(from_film == from_rigid);

  // Uniform common translation preserves the relative geometry.
  auto shifted = zeros;
  shifted[0].offsets.col(0).array() += 1.0e-3;
  shifted[0].offsets.col(2).array() += 0.5e-3;
  shifted[1].offsets.col(0).array() += 1.0e-3;
  shifted[1].offsets.col(2).array() += 0.5e-3;
  const Eigen::MatrixXcd translated =
      film_response(film, profiles, shifted, input, kLambda, 0.17);
  CHECK((translated - from_film).cwiseAbs().maxCoeff() /
            from_film.cwiseAbs().maxCoeff() <
        1e-9);

  // A single displaced atom changes exactly its own coupling column.
  auto single = zeros;
  single[0].offsets(4, 2) = 1.0e-3;
  const Eigen::MatrixXcd w_base = build_coupling(
      film.layers[0].atom_positions(), film.layers[1].atom_positions(),
      kLambda, film.layers[0].atom_area);
  auto moved_positions = film.layers[0].atom_positions();
  moved_positions(4, 2) += 1.0e-3;
  const Eigen::MatrixXcd w_moved =
      build_coupling(moved_positions, film.layers[1].atom_positions(), kLambda,
                     film.layers[0].atom_area);
  Eigen::MatrixXcd delta = w_moved - w_base;
  CHECK(delta.col(4).norm() > 0.0);
  delta.col(4).setZero();
  CHECK(delta.cwiseAbs().maxCoeff() == 0.0);

  // Bound violations are rejected.
  auto outside = zeros;
  outside[1].offsets(0, 1) = 3.0e-3;
  CHECK_THROWS_AS((void)film_response(film, profiles, outside, input, kLambda,
                                      0.17),
                  std::domain_error);
}

TEST_CASE("film displacement column-change regression") {
  // 10x10 layers at the 5 mm gap; +1 mm axial shift of atom 42.
  LayerGeometry first = half_wave_layer(10, 10, 5e-3);
  LayerGeometry second = half_wave_layer(10, 10, 10e-3);
  const Eigen::MatrixXcd base =
      build_coupling(first.atom_positions(), second.atom_positions(), kLambda,
                     first.atom_area);
  auto moved = first.atom_positions();
  moved(42, 2) += 1.0e-3;
  const Eigen::MatrixXcd shifted = build_coupling(
      moved, second.atom_positions(), kLambda, first.atom_area);
  CHECK((shifted.col(42) - base.col(42)).norm() ==
        doctest::Approx(0.42567547742473461).epsilon(1e-12));
}

TEST_CASE("effective_downlink composition") {
  Rng rng(17);
  Eigen::MatrixXcd response(6, 2);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 6; ++r) response(r, c) = rng.next_cgaussian(1.0);

  CHECK(effective_downlink(response, Eigen::MatrixXcd::Identity(6, 6)) ==
        response);
  CHECK(effective_downlink(response, Eigen::MatrixXcd::Zero(3, 6)).cwiseAbs()
            .maxCoeff() == 0.0);

  Eigen::VectorXcd gains(4);
  gains << 1.0, 0.5, std::complex<double>(0, 1), 0.25;
  Eigen::MatrixXcd channel(2, 4);
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 2; ++r) channel(r, c) = rng.next_cgaussian(1.0);
  const Eigen::MatrixXcd diagonal_route = effective_downlink(gains, channel);
  CHECK((diagonal_route - channel * gains.asDiagonal()).cwiseAbs().maxCoeff() <
        1e-15);

  CHECK_THROWS_AS(
      (void)effective_downlink(response, Eigen::MatrixXcd::Identity(3, 5)),
      std::invalid_argument);
}

TEST_CASE("architecture validation rules") {
  CHECK_THROWS_AS((void)make_conventional(17, 2, 2, kLambda, 5e-3, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)make_conventional(2, 2, 2, kLambda, 5e-3, 1.0),
                  std::invalid_argument);

  const ArchitectureSpec mfsim = make_mfsim(4, 4, kLambda, 5e-3, 0.1);
  CHECK(mfsim.aperture_atoms() == 16);
  CHECK(std::get<MfsimSpec>(mfsim.variant).layers[0].atom_count() == 32);
  CHECK(mfsim.num_layers() == 2);

  const ArchitectureSpec film = make_film(4, 4, kLambda, 5e-3, 2.4e-3, 0.1);
  CHECK(film.aperture_geometry().z_offset == doctest::Approx(10e-3));
}
