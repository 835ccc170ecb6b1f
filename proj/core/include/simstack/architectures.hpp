// SPDX-License-Identifier: Apache-2.0
//
// Forward models for the three stacked-metasurface front ends:
//
//   * Conventional multi-layer stack: phase-only layers chained by wireless
//     Rayleigh-Sommerfeld coupling,
//       G = sqrt(1-alpha)^L * Phi_L W_L ... Phi_1 W_1.
//   * Meta-fiber two-layer stack (MF-SIM): the layers are joined by lossless
//     2-to-1 wire pairs, which collapses the end-to-end transfer to one
//     complex gain per output atom,
//       g_n = (1-alpha) * e^{i phi_n} * (e^{i theta_a} + e^{i theta_b}) / 2.
//   * Morphable two-layer stack (FILM): atoms may shift inside a bounded
//     3D range, which re-shapes the inter-layer coupling matrix.
//
// alpha is the power fraction lost per metasurface traversal; each traversal
// multiplies the amplitude by sqrt(1-alpha).

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "simstack/propagation.hpp"

namespace simstack {

/// Per-atom phase shifts of one layer, radians. Values are interpreted
/// modulo 2*pi; optimizers report them wrapped to [0, 2*pi).
using PhaseProfile = Eigen::VectorXd;

/// e^{i theta} per atom.
Eigen::VectorXcd phase_factors(const PhaseProfile& profile);

/// Diagonal unit-modulus matrix diag(e^{i theta_1}, ..., e^{i theta_N}).
Eigen::MatrixXcd phase_matrix(const PhaseProfile& profile);

/// Wraps phases into [0, 2*pi).
PhaseProfile wrap_phases(const PhaseProfile& profile);

/// Wire map of the meta-fiber stack: second-layer atom n is fed by
/// first-layer atoms pairs[n][0] and pairs[n][1]. A valid topology is a
/// perfect 2-to-1 matching, so the first layer has exactly twice the atoms
/// of the second.
struct WiredTopology {
  std::vector<std::array<int, 2>> pairs;

  int second_layer_count() const { return static_cast<int>(pairs.size()); }
  int first_layer_count() const { return 2 * second_layer_count(); }

  /// Default wiring: (2n, 2n+1) -> n.
  static WiredTopology adjacent(int second_layer_atoms);

  void validate() const;  // throws std::invalid_argument
};

/// Bounded 3D offsets of one layer's atoms, meters. Every component must
/// satisfy |offset| <= bound.
struct DisplacementProfile {
  Eigen::Matrix<double, Eigen::Dynamic, 3> offsets;
  double bound = 0.0;

  static DisplacementProfile zeros(int atoms, double bound);
  void validate() const;  // throws std::domain_error on bound violations
};

struct ConventionalSpec {
  std::vector<LayerGeometry> layers;  // ordered by increasing z_offset
  double inter_layer_gap = 0.0;       // m, informational (layers carry z)
};

struct MfsimSpec {
  WiredTopology topology;
  std::array<LayerGeometry, 2> layers;  // [first (2N atoms), second (N atoms)]
};

struct FilmSpec {
  std::array<LayerGeometry, 2> layers;
  double displacement_bound = 0.0;  // m, max per-axis offset magnitude
};

/// Architecture selector plus the per-traversal power attenuation ratio.
struct ArchitectureSpec {
  std::variant<ConventionalSpec, MfsimSpec, FilmSpec> variant;
  double attenuation_ratio = 0.0;  // in [0, 1)

  int num_layers() const;
  int aperture_atoms() const;       // atoms of the radiating (last) layer
  int first_stage_inputs() const;   // columns expected of the input coupling
  const LayerGeometry& aperture_geometry() const;
  void validate() const;
};

/// Convenience builders for half-wavelength-spaced stacks. Layer l sits at
/// z = l * gap (the feed plane is z = 0, so the feed-to-first-layer gap
/// equals the inter-layer gap).
ArchitectureSpec make_conventional(int num_layers, int rows, int cols,
                                   double lambda, double gap, double alpha);
/// First layer carries 2*rows*cols atoms wired pairwise onto the second.
ArchitectureSpec make_mfsim(int rows, int cols, double lambda, double gap,
                            double alpha);
ArchitectureSpec make_film(int rows, int cols, double lambda, double gap,
                           double displacement_bound, double alpha);

/// Amplitude factor of `layers` metasurface traversals: sqrt(1-alpha)^layers,
/// accumulated by repeated multiplication so equal layer counts are
/// bit-identical across call sites.
double traversal_amplitude(double alpha, int layers);

/// End-to-end response of a conventional stack (last-layer atoms x feeds):
///   G = sqrt(1-alpha)^L * Phi_L W_L ... Phi_1 W_1,
/// where W_1 = input_coupling and W_l (l >= 2) is rebuilt from the layer
/// geometries. One profile per layer.
Eigen::MatrixXcd conventional_response(const ConventionalSpec& spec,
                                       const std::vector<PhaseProfile>& profiles,
                                       const Eigen::MatrixXcd& input_coupling,
                                       double lambda, double alpha);

/// Per-atom complex gains of the meta-fiber stack. theta_first has 2N
/// entries, phi_second N entries. The wired hop is lossless; the 1/2
/// combiner normalization caps the coherent gain at 1-alpha.
Eigen::VectorXcd mfsim_response(const PhaseProfile& theta_first,
                                const PhaseProfile& phi_second,
                                const WiredTopology& topology, double alpha);

/// Closed-form phases realizing per-atom targets t_n with |t_n| <= 1
/// (targets are pre-attenuation):
///   theta_a = arg t + arccos|t|, theta_b = arg t - arccos|t|, phi = 0.
/// Throws InfeasibleAmplitudeError listing indices with |t_n| > 1.
std::pair<PhaseProfile, PhaseProfile> mfsim_synthesize(
    const Eigen::VectorXcd& targets, double alpha);

/// End-to-end response of the morphable stack. The inter-layer coupling is
/// rebuilt from displaced atom positions; the input coupling is held at the
/// nominal geometry. profiles/displacements are indexed [layer1, layer2].
Eigen::MatrixXcd film_response(
    const FilmSpec& spec, const std::array<PhaseProfile, 2>& profiles,
    const std::array<DisplacementProfile, 2>& displacements,
    const Eigen::MatrixXcd& input_coupling, double lambda, double alpha);

/// Effective downlink channel: channel * sim_response.
Eigen::MatrixXcd effective_downlink(const Eigen::MatrixXcd& sim_response,
                                    const Eigen::MatrixXcd& channel);
/// Vector overload for diagonal (per-atom gain) front ends:
/// channel * diag(gains).
Eigen::MatrixXcd effective_downlink(const Eigen::VectorXcd& per_atom_gains,
                                    const Eigen::MatrixXcd& channel);

/// One tunable configuration of an architecture. Conventional stacks use one
/// PhaseProfile per layer; the meta-fiber stack uses {theta(2N), phi(N)}; the
/// morphable stack uses two profiles plus two displacement profiles.
struct SimConfig {
  std::vector<PhaseProfile> phases;
  std::vector<DisplacementProfile> displacements;
};

}  // namespace simstack
