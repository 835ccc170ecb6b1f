// SPDX-License-Identifier: Apache-2.0

#include "simstack/architectures.hpp"

#include <cmath>
#include <stdexcept>

#include "simstack/errors.hpp"

namespace simstack {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

LayerGeometry half_wavelength_layer(int rows, int cols, double lambda,
                                    double z_offset) {
  LayerGeometry layer;
  layer.rows = rows;
  layer.cols = cols;
  layer.atom_spacing = 0.5 * lambda;
  layer.atom_area = 0.25 * lambda * lambda;
  layer.z_offset = z_offset;
  return layer;
}

}  // namespace

Eigen::VectorXcd phase_factors(const PhaseProfile& profile) {
  Eigen::VectorXcd factors(profile.size());
  for (Eigen::Index n = 0; n < profile.size(); ++n)
    factors(n) = std::polar(1.0, profile(n));
  return factors;
}

Eigen::MatrixXcd phase_matrix(const PhaseProfile& profile) {
  return phase_factors(profile).asDiagonal();
}

PhaseProfile wrap_phases(const PhaseProfile& profile) {
  PhaseProfile wrapped(profile.size());
  for (Eigen::Index n = 0; n < profile.size(); ++n) {
    double value = std::fmod(profile(n), kTwoPi);
    if (value < 0.0) value += kTwoPi;
    wrapped(n) = value;
  }
  return wrapped;
}

WiredTopology WiredTopology::adjacent(int second_layer_atoms) {
  WiredTopology topology;
  topology.pairs.resize(second_layer_atoms);
  for (int n = 0; n < second_layer_atoms; ++n)
    topology.pairs[n] = {2 * n, 2 * n + 1};
  return topology;
}

void WiredTopology::validate() const {
  if (pairs.empty())
    throw std::invalid_argument("WiredTopology: empty pair list");
  const int first_count = first_layer_count();
  std::vector<int> uses(first_count, 0);
  for (const auto& pair : pairs) {
    for (int index : pair) {
      if (index < 0 || index >= first_count)
        throw std::invalid_argument(
            "WiredTopology: first-layer index out of range");
      ++uses[index];
    }
    if (pair[0] == pair[1])
      throw std::invalid_argument(
          "WiredTopology: a pair must reference two distinct atoms");
  }
  for (int count : uses)
    if (count != 1)
      throw std::invalid_argument(
          "WiredTopology: not a perfect 2-to-1 matching");
}

DisplacementProfile DisplacementProfile::zeros(int atoms, double bound) {
  DisplacementProfile profile;
  profile.offsets = Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(atoms, 3);
  profile.bound = bound;
  return profile;
}

void DisplacementProfile::validate() const {
  if (!(bound >= 0.0))
    throw std::domain_error("DisplacementProfile: bound must be >= 0");
  const double tolerance = bound * 1e-12;
  if ((offsets.array().abs() > bound + tolerance).any())
    throw std::domain_error(
        "DisplacementProfile: offset component exceeds the morphing bound");
}

int ArchitectureSpec::num_layers() const {
  if (const auto* conventional = std::get_if<ConventionalSpec>(&variant))
    return static_cast<int>(conventional->layers.size());
  return 2;
}

int ArchitectureSpec::aperture_atoms() const {
  if (const auto* conventional = std::get_if<ConventionalSpec>(&variant))
    return conventional->layers.back().atom_count();
  if (const auto* mfsim = std::get_if<MfsimSpec>(&variant))
    return mfsim->layers[1].atom_count();
  return std::get<FilmSpec>(variant).layers[1].atom_count();
}

const LayerGeometry& ArchitectureSpec::aperture_geometry() const {
  if (const auto* conventional = std::get_if<ConventionalSpec>(&variant))
    return conventional->layers.back();
  if (const auto* mfsim = std::get_if<MfsimSpec>(&variant))
    return mfsim->layers[1];
  return std::get<FilmSpec>(variant).layers[1];
}

int ArchitectureSpec::first_stage_inputs() const {
  if (const auto* conventional = std::get_if<ConventionalSpec>(&variant))
    return conventional->layers.front().atom_count();
  // The meta-fiber stack is driven at cell granularity (one cell per
  // second-layer atom); the morphable stack at its first layer.
  if (const auto* mfsim = std::get_if<MfsimSpec>(&variant))
    return mfsim->layers[1].atom_count();
  return std::get<FilmSpec>(variant).layers[0].atom_count();
}

void ArchitectureSpec::validate() const {
  if (!(attenuation_ratio >= 0.0 && attenuation_ratio < 1.0))
    throw std::invalid_argument(
        "ArchitectureSpec: attenuation_ratio must lie in [0, 1)");
  if (const auto* conventional = std::get_if<ConventionalSpec>(&variant)) {
    const int count = static_cast<int>(conventional->layers.size());
    if (count < 1 || count > 16)
      throw std::invalid_argument(
          "ArchitectureSpec: conventional stacks support 1..16 layers");
    double previous = -1.0;
    for (const auto& layer : conventional->layers) {
      layer.validate();
      if (layer.z_offset <= previous)
        throw std::invalid_argument(
            "ArchitectureSpec: layers must be ordered by increasing z_offset");
      previous = layer.z_offset;
    }
  } else if (const auto* mfsim = std::get_if<MfsimSpec>(&variant)) {
    mfsim->topology.validate();
    mfsim->layers[0].validate();
    mfsim->layers[1].validate();
    if (mfsim->topology.first_layer_count() != mfsim->layers[0].atom_count() ||
        mfsim->topology.second_layer_count() != mfsim->layers[1].atom_count())
      throw std::invalid_argument(
          "ArchitectureSpec: wired topology does not match the layer sizes");
  } else {
    const auto& film = std::get<FilmSpec>(variant);
    film.layers[0].validate();
    film.layers[1].validate();
    if (!(film.displacement_bound >= 0.0))
      throw std::invalid_argument(
          "ArchitectureSpec: displacement bound must be >= 0");
    if (!(film.layers[1].z_offset > film.layers[0].z_offset))
      throw std::invalid_argument(
          "ArchitectureSpec: morphable layers must be stacked in z order");
  }
}

ArchitectureSpec make_conventional(int num_layers, int rows, int cols,
                                   double lambda, double gap, double alpha) {
  ConventionalSpec spec;
  spec.inter_layer_gap = gap;
  spec.layers.reserve(num_layers);
  for (int l = 1; l <= num_layers; ++l)
    spec.layers.push_back(half_wavelength_layer(rows, cols, lambda, l * gap));
  ArchitectureSpec arch{std::move(spec), alpha};
  arch.validate();
  return arch;
}

ArchitectureSpec make_mfsim(int rows, int cols, double lambda, double gap,
                            double alpha) {
  MfsimSpec spec;
  spec.layers[0] = half_wavelength_layer(2 * rows, cols, lambda, gap);
  spec.layers[1] = half_wavelength_layer(rows, cols, lambda, 2.0 * gap);
  spec.topology = WiredTopology::adjacent(rows * cols);
  ArchitectureSpec arch{std::move(spec), alpha};
  arch.validate();
  return arch;
}

ArchitectureSpec make_film(int rows, int cols, double lambda, double gap,
                           double displacement_bound, double alpha) {
  FilmSpec spec;
  spec.layers[0] = half_wavelength_layer(rows, cols, lambda, gap);
  spec.layers[1] = half_wavelength_layer(rows, cols, lambda, 2.0 * gap);
  spec.displacement_bound = displacement_bound;
  ArchitectureSpec arch{std::move(spec), alpha};
  arch.validate();
  return arch;
}

double traversal_amplitude(double alpha, int layers) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("traversal_amplitude: alpha must be in [0, 1)");
  const double per_layer = std::sqrt(1.0 - alpha);
  double amplitude = 1.0;
  for (int l = 0; l < layers; ++l) amplitude *= per_layer;
  return amplitude;
}

Eigen::MatrixXcd conventional_response(const ConventionalSpec& spec,
                                       const std::vector<PhaseProfile>& profiles,
                                       const Eigen::MatrixXcd& input_coupling,
                                       double lambda, double alpha) {
  const int num_layers = static_cast<int>(spec.layers.size());
  if (static_cast<int>(profiles.size()) != num_layers)
    throw std::invalid_argument(
        "conventional_response: one phase profile per layer required");
  if (input_coupling.rows() != spec.layers.front().atom_count())
    throw std::invalid_argument(
        "conventional_response: input coupling rows must match the first "
        "layer atom count");

  Eigen::MatrixXcd field = input_coupling;
  for (int l = 0; l < num_layers; ++l) {
    if (profiles[l].size() != spec.layers[l].atom_count())
      throw std::invalid_argument(
          "conventional_response: phase profile length mismatch");
    field = phase_factors(profiles[l]).asDiagonal() * field;
    if (l + 1 < num_layers)
      field = build_coupling(spec.layers[l], spec.layers[l + 1], lambda) * field;
  }
  return traversal_amplitude(alpha, num_layers) * field;
}

Eigen::VectorXcd mfsim_response(const PhaseProfile& theta_first,
                                const PhaseProfile& phi_second,
                                const WiredTopology& topology, double alpha) {
  topology.validate();
  if (theta_first.size() != topology.first_layer_count() ||
      phi_second.size() != topology.second_layer_count())
    throw std::invalid_argument(
        "mfsim_response: profile lengths do not match the topology");

  // Two traversals of lossy metasurfaces, a lossless wired hop in between.
  const double amplitude = traversal_amplitude(alpha, 2);
  const int count = topology.second_layer_count();
  Eigen::VectorXcd gains(count);
  for (int n = 0; n < count; ++n) {
    const auto [a, b] = topology.pairs[n];
    const std::complex<double> combined =
        0.5 * (std::polar(1.0, theta_first(a)) + std::polar(1.0, theta_first(b)));
    gains(n) = amplitude * std::polar(1.0, phi_second(n)) * combined;
  }
  return gains;
}

std::pair<PhaseProfile, PhaseProfile> mfsim_synthesize(
    const Eigen::VectorXcd& targets, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("mfsim_synthesize: alpha must be in [0, 1)");
  std::vector<int> infeasible;
  for (Eigen::Index n = 0; n < targets.size(); ++n)
    if (std::abs(targets(n)) > 1.0 + 1e-12)
      infeasible.push_back(static_cast<int>(n));
  if (!infeasible.empty())
    throw InfeasibleAmplitudeError(
        "mfsim_synthesize: target magnitudes exceed 1", std::move(infeasible));

  const Eigen::Index count = targets.size();
  PhaseProfile theta(2 * count);
  PhaseProfile phi = PhaseProfile::Zero(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    const double magnitude = std::min(std::abs(targets(n)), 1.0);
    const double argument = std::arg(targets(n));
    const double split = std::acos(magnitude);
    theta(2 * n) = argument + split;
    theta(2 * n + 1) = argument - split;
  }
  return {wrap_phases(theta), phi};
}

Eigen::MatrixXcd film_response(
    const FilmSpec& spec, const std::array<PhaseProfile, 2>& profiles,
    const std::array<DisplacementProfile, 2>& displacements,
    const Eigen::MatrixXcd& input_coupling, double lambda, double alpha) {
  for (int l = 0; l < 2; ++l) {
    if (profiles[l].size() != spec.layers[l].atom_count())
      throw std::invalid_argument("film_response: phase profile length mismatch");
    if (displacements[l].offsets.rows() != spec.layers[l].atom_count())
      throw std::invalid_argument(
          "film_response: displacement profile length mismatch");
    displacements[l].validate();
    if (displacements[l].bound > spec.displacement_bound + 1e-15)
      throw std::domain_error(
          "film_response: displacement bound exceeds the architecture bound");
  }
  if (input_coupling.rows() != spec.layers[0].atom_count())
    throw std::invalid_argument(
        "film_response: input coupling rows must match the first layer");

  const Eigen::Matrix<double, Eigen::Dynamic, 3> src =
      spec.layers[0].atom_positions() + displacements[0].offsets;
  const Eigen::Matrix<double, Eigen::Dynamic, 3> dst =
      spec.layers[1].atom_positions() + displacements[1].offsets;
  const Eigen::MatrixXcd coupling =
      build_coupling(src, dst, lambda, spec.layers[0].atom_area);

  Eigen::MatrixXcd field = phase_factors(profiles[0]).asDiagonal() * input_coupling;
  field = coupling * field;
  field = phase_factors(profiles[1]).asDiagonal() * field;
  return traversal_amplitude(alpha, 2) * field;
}

Eigen::MatrixXcd effective_downlink(const Eigen::MatrixXcd& sim_response,
                                    const Eigen::MatrixXcd& channel) {
  if (channel.cols() != sim_response.rows())
    throw std::invalid_argument(
        "effective_downlink: channel columns must match the response rows");
  return channel * sim_response;
}

Eigen::MatrixXcd effective_downlink(const Eigen::VectorXcd& per_atom_gains,
                                    const Eigen::MatrixXcd& channel) {
  if (channel.cols() != per_atom_gains.size())
    throw std::invalid_argument(
        "effective_downlink: channel columns must match the gain count");
  return channel * per_atom_gains.asDiagonal();
}

}  // namespace simstack
