// SPDX-License-Identifier: Apache-2.0
//
// Reusable forward/adjoint machinery for the cascaded front-end models. A
// CouplingSet holds the geometry-dependent matrices (expensive, immutable,
// shareable across threads); a ResponseEvaluator owns the per-thread
// workspaces and computes responses and parameter gradients.
//
// Gradients are taken of any scalar objective through the chain rule: the
// caller supplies gbar with dObj = 2 Re <gbar, dG> (Frobenius inner product)
// and receives d(obj)/d(phases) or d(obj)/d(displacement coordinates).

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

#include "simstack/architectures.hpp"

namespace simstack {

struct CouplingSet {
  Eigen::MatrixXcd input;               // feed -> first stage
  std::vector<Eigen::MatrixXcd> inter;  // stage l -> l+1 (nominal for morphable)
  // Nominal atom positions of the morphable pair, for displaced rebuilds.
  Eigen::Matrix<double, Eigen::Dynamic, 3> film_src;
  Eigen::Matrix<double, Eigen::Dynamic, 3> film_dst;
  double film_src_area = 0.0;
  double lambda = 0.0;
};
using CouplingSetPtr = std::shared_ptr<const CouplingSet>;

/// Builds the input coupling (feed array -> first stage) and all nominal
/// inter-layer couplings for an architecture. For the meta-fiber stack the
/// input coupling is evaluated at cell granularity: one cell per wired pair,
/// located on the second-layer grid at the first layer's stack offset.
CouplingSetPtr build_couplings(const ArchitectureSpec& spec,
                               const LayerGeometry& feed, double lambda);

class ResponseEvaluator {
 public:
  ResponseEvaluator(ArchitectureSpec spec, LayerGeometry feed, double lambda);
  ResponseEvaluator(ArchitectureSpec spec, double lambda, CouplingSetPtr couplings);

  const ArchitectureSpec& spec() const { return spec_; }
  double lambda() const { return lambda_; }
  int feeds() const { return static_cast<int>(couplings_->input.cols()); }
  int aperture() const { return spec_.aperture_atoms(); }
  const Eigen::MatrixXcd& input_coupling() const { return couplings_->input; }
  const CouplingSetPtr& couplings() const { return couplings_; }

  int phase_count() const;
  int displacement_count() const;  // scalar coordinates; 0 unless morphable

  /// Attenuation may be swept without rebuilding couplings.
  void set_attenuation(double alpha);

  SimConfig zero_config() const;
  /// Uniform random phases in [0, 2*pi), zero displacements.
  SimConfig random_config(std::uint64_t seed) const;

  void stack_phases(const SimConfig& config, Eigen::VectorXd& out) const;
  void unstack_phases(const Eigen::VectorXd& stacked, SimConfig& config) const;
  void stack_displacements(const SimConfig& config, Eigen::VectorXd& out) const;
  void unstack_displacements(const Eigen::VectorXd& stacked,
                             SimConfig& config) const;
  /// Clips stacked displacement coordinates into [-bound, bound].
  void project_displacements(Eigen::VectorXd& stacked) const;

  /// End-to-end response (aperture x feeds). Keeps the layer activations for
  /// a following gradient call with the same configuration.
  const Eigen::MatrixXcd& response(const SimConfig& config);

  /// d(obj)/d(stacked phases); requires response(config) to have been the
  /// last forward evaluation.
  void phase_gradient(const SimConfig& config, const Eigen::MatrixXcd& gbar,
                      Eigen::VectorXd& out);
  /// d(obj)/d(stacked displacement coordinates); morphable stacks only.
  void displacement_gradient(const SimConfig& config,
                             const Eigen::MatrixXcd& gbar,
                             Eigen::VectorXd& out);

 private:
  enum class Kind { kConventional, kMfsim, kFilm };

  void init();
  const Eigen::MatrixXcd& film_coupling(const SimConfig& config);

  ArchitectureSpec spec_;
  double lambda_ = 0.0;
  CouplingSetPtr couplings_;
  Kind kind_ = Kind::kConventional;
  int num_stages_ = 0;

  // Forward state.
  std::vector<Eigen::VectorXcd> factors_;    // e^{i theta} per stage
  std::vector<Eigen::MatrixXcd> pre_phase_;  // activation entering each stage
  Eigen::MatrixXcd response_;
  Eigen::VectorXcd mfsim_gains_;

  // Two-slot morphable coupling cache keyed on exact displaced positions;
  // slot 0 is most recent. Two slots keep accept/reject line-search pairs
  // resident so a rejected trial does not force a rebuild of the incumbent.
  struct FilmCacheSlot {
    Eigen::MatrixXcd coupling;
    Eigen::Matrix<double, Eigen::Dynamic, 3> src;
    Eigen::Matrix<double, Eigen::Dynamic, 3> dst;
    bool valid = false;
  };
  FilmCacheSlot film_cache_[2];
  const Eigen::MatrixXcd* film_active_ = nullptr;  // coupling of the last forward

  // Scratch.
  Eigen::MatrixXcd scratch_a_, scratch_b_;
};

}  // namespace simstack
