// SPDX-License-Identifier: Apache-2.0

#include "simstack/cascade.hpp"

#include <cmath>
#include <stdexcept>

#include "simstack/rng.hpp"

namespace simstack {

namespace {
constexpr double kTwoPi = 2.0 * kPi;
}

CouplingSetPtr build_couplings(const ArchitectureSpec& spec,
                               const LayerGeometry& feed, double lambda) {
  spec.validate();
  feed.validate();
  auto couplings = std::make_shared<CouplingSet>();
  couplings->lambda = lambda;

  if (const auto* conventional = std::get_if<ConventionalSpec>(&spec.variant)) {
    couplings->input = build_coupling(feed, conventional->layers.front(), lambda);
    for (std::size_t l = 0; l + 1 < conventional->layers.size(); ++l)
      couplings->inter.push_back(build_coupling(conventional->layers[l],
                                                conventional->layers[l + 1],
                                                lambda));
  } else if (const auto* mfsim = std::get_if<MfsimSpec>(&spec.variant)) {
    // The wired stack is driven by an ideal segmented feed network: the
    // cells are partitioned round-robin into one sub-area per feed, and each
    // feed drives its sub-area uniformly at unit total power. (A wireless
    // near-field hop would confine each feed's energy to a small
    // illumination spot, which contradicts the lossless guided input the
    // meta-fiber platform provides.)
    const int cells = mfsim->layers[1].atom_count();
    const int feeds = feed.atom_count();
    couplings->input = Eigen::MatrixXcd::Zero(cells, feeds);
    std::vector<int> segment_size(feeds, 0);
    for (int n = 0; n < cells; ++n) ++segment_size[n % feeds];
    for (int n = 0; n < cells; ++n)
      couplings->input(n, n % feeds) =
          1.0 / std::sqrt(static_cast<double>(segment_size[n % feeds]));
  } else {
    const auto& film = std::get<FilmSpec>(spec.variant);
    couplings->input = build_coupling(feed, film.layers[0], lambda);
    couplings->inter.push_back(
        build_coupling(film.layers[0], film.layers[1], lambda));
    couplings->film_src = film.layers[0].atom_positions();
    couplings->film_dst = film.layers[1].atom_positions();
    couplings->film_src_area = film.layers[0].atom_area;
  }
  return couplings;
}

ResponseEvaluator::ResponseEvaluator(ArchitectureSpec spec, LayerGeometry feed,
                                     double lambda)
    : spec_(std::move(spec)),
      lambda_(lambda),
      couplings_(build_couplings(spec_, feed, lambda)) {
  init();
}

ResponseEvaluator::ResponseEvaluator(ArchitectureSpec spec, double lambda,
                                     CouplingSetPtr couplings)
    : spec_(std::move(spec)), lambda_(lambda), couplings_(std::move(couplings)) {
  spec_.validate();
  init();
}

void ResponseEvaluator::init() {
  if (std::holds_alternative<ConventionalSpec>(spec_.variant)) {
    kind_ = Kind::kConventional;
    num_stages_ = spec_.num_layers();
  } else if (std::holds_alternative<MfsimSpec>(spec_.variant)) {
    kind_ = Kind::kMfsim;
    num_stages_ = 2;
  } else {
    kind_ = Kind::kFilm;
    num_stages_ = 2;
  }
  factors_.resize(num_stages_);
  pre_phase_.resize(num_stages_);
}

int ResponseEvaluator::phase_count() const {
  if (kind_ == Kind::kMfsim) {
    const auto& mfsim = std::get<MfsimSpec>(spec_.variant);
    return mfsim.layers[0].atom_count() + mfsim.layers[1].atom_count();
  }
  if (kind_ == Kind::kFilm) {
    const auto& film = std::get<FilmSpec>(spec_.variant);
    return film.layers[0].atom_count() + film.layers[1].atom_count();
  }
  int total = 0;
  for (const auto& layer : std::get<ConventionalSpec>(spec_.variant).layers)
    total += layer.atom_count();
  return total;
}

int ResponseEvaluator::displacement_count() const {
  if (kind_ != Kind::kFilm) return 0;
  const auto& film = std::get<FilmSpec>(spec_.variant);
  return 3 * (film.layers[0].atom_count() + film.layers[1].atom_count());
}

void ResponseEvaluator::set_attenuation(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("set_attenuation: alpha must be in [0, 1)");
  spec_.attenuation_ratio = alpha;
}

SimConfig ResponseEvaluator::zero_config() const {
  SimConfig config;
  if (kind_ == Kind::kConventional) {
    for (const auto& layer : std::get<ConventionalSpec>(spec_.variant).layers)
      config.phases.push_back(PhaseProfile::Zero(layer.atom_count()));
  } else if (kind_ == Kind::kMfsim) {
    const auto& mfsim = std::get<MfsimSpec>(spec_.variant);
    config.phases.push_back(PhaseProfile::Zero(mfsim.layers[0].atom_count()));
    config.phases.push_back(PhaseProfile::Zero(mfsim.layers[1].atom_count()));
  } else {
    const auto& film = std::get<FilmSpec>(spec_.variant);
    for (int l = 0; l < 2; ++l) {
      config.phases.push_back(PhaseProfile::Zero(film.layers[l].atom_count()));
      config.displacements.push_back(DisplacementProfile::zeros(
          film.layers[l].atom_count(), film.displacement_bound));
    }
  }
  return config;
}

SimConfig ResponseEvaluator::random_config(std::uint64_t seed) const {
  SimConfig config = zero_config();
  Rng rng(seed);
  for (auto& profile : config.phases)
    for (Eigen::Index n = 0; n < profile.size(); ++n)
      profile(n) = kTwoPi * rng.next_double();
  return config;
}

void ResponseEvaluator::stack_phases(const SimConfig& config,
                                     Eigen::VectorXd& out) const {
  out.resize(phase_count());
  Eigen::Index offset = 0;
  for (const auto& profile : config.phases) {
    out.segment(offset, profile.size()) = profile;
    offset += profile.size();
  }
}

void ResponseEvaluator::unstack_phases(const Eigen::VectorXd& stacked,
                                       SimConfig& config) const {
  Eigen::Index offset = 0;
  for (auto& profile : config.phases) {
    profile = stacked.segment(offset, profile.size());
    offset += profile.size();
  }
}

void ResponseEvaluator::stack_displacements(const SimConfig& config,
                                            Eigen::VectorXd& out) const {
  out.resize(displacement_count());
  Eigen::Index offset = 0;
  for (const auto& profile : config.displacements) {
    for (Eigen::Index n = 0; n < profile.offsets.rows(); ++n)
      for (int j = 0; j < 3; ++j) out(offset++) = profile.offsets(n, j);
  }
}

void ResponseEvaluator::unstack_displacements(const Eigen::VectorXd& stacked,
                                              SimConfig& config) const {
  Eigen::Index offset = 0;
  for (auto& profile : config.displacements) {
    for (Eigen::Index n = 0; n < profile.offsets.rows(); ++n)
      for (int j = 0; j < 3; ++j) profile.offsets(n, j) = stacked(offset++);
  }
}

void ResponseEvaluator::project_displacements(Eigen::VectorXd& stacked) const {
  if (kind_ != Kind::kFilm) return;
  const auto& film = std::get<FilmSpec>(spec_.variant);
  const double bound = film.displacement_bound;
  stacked = stacked.cwiseMax(-bound).cwiseMin(bound);

  // Axial guard: the diffraction model is only trusted down to about a third
  // of a wavelength of layer separation, and closer approach would let the
  // near-field term act as an amplifier. Axial offsets are clipped so the
  // layers always keep that much clearance.
  const double gap = film.layers[1].z_offset - film.layers[0].z_offset;
  const double z_allow =
      std::min(bound, std::max(0.0, 0.5 * (gap - 0.35 * lambda_)));
  for (Eigen::Index i = 2; i < stacked.size(); i += 3)
    stacked(i) = std::min(std::max(stacked(i), -z_allow), z_allow);
}

const Eigen::MatrixXcd& ResponseEvaluator::film_coupling(const SimConfig& config) {
  const Eigen::Matrix<double, Eigen::Dynamic, 3> src =
      couplings_->film_src + config.displacements[0].offsets;
  const Eigen::Matrix<double, Eigen::Dynamic, 3> dst =
      couplings_->film_dst + config.displacements[1].offsets;
  for (int slot = 0; slot < 2; ++slot) {
    FilmCacheSlot& entry = film_cache_[slot];
    if (entry.valid && (entry.src.array() == src.array()).all() &&
        (entry.dst.array() == dst.array()).all()) {
      if (slot == 1) std::swap(film_cache_[0], film_cache_[1]);
      film_active_ = &film_cache_[0].coupling;
      return *film_active_;
    }
  }
  std::swap(film_cache_[0], film_cache_[1]);  // evict the older slot
  FilmCacheSlot& entry = film_cache_[0];
  entry.coupling = build_coupling(src, dst, lambda_, couplings_->film_src_area);
  entry.src = src;
  entry.dst = dst;
  entry.valid = true;
  film_active_ = &entry.coupling;
  return *film_active_;
}

const Eigen::MatrixXcd& ResponseEvaluator::response(const SimConfig& config) {
  const double alpha = spec_.attenuation_ratio;
  if (kind_ == Kind::kMfsim) {
    const auto& mfsim = std::get<MfsimSpec>(spec_.variant);
    mfsim_gains_ =
        mfsim_response(config.phases[0], config.phases[1], mfsim.topology, alpha);
    response_ = couplings_->input;
    response_.array().colwise() *= mfsim_gains_.array();
    return response_;
  }

  if (kind_ == Kind::kFilm) {
    const auto& film = std::get<FilmSpec>(spec_.variant);
    if (config.displacements.size() != 2)
      throw std::invalid_argument("response: morphable config needs 2 displacement profiles");
    for (const auto& profile : config.displacements) {
      profile.validate();
      if (profile.bound > film.displacement_bound + 1e-15)
        throw std::domain_error("response: displacement bound exceeds the architecture bound");
    }
  }

  const int stages = num_stages_;
  pre_phase_[0] = couplings_->input;
  for (int l = 0; l < stages; ++l) {
    factors_[l] = phase_factors(config.phases[l]);
    scratch_a_ = factors_[l].asDiagonal() * pre_phase_[l];
    if (l + 1 < stages) {
      const Eigen::MatrixXcd& coupling =
          (kind_ == Kind::kFilm) ? film_coupling(config) : couplings_->inter[l];
      pre_phase_[l + 1].noalias() = coupling * scratch_a_;
    } else {
      response_ = traversal_amplitude(alpha, stages) * scratch_a_;
    }
  }
  return response_;
}

void ResponseEvaluator::phase_gradient(const SimConfig& config,
                                       const Eigen::MatrixXcd& gbar,
                                       Eigen::VectorXd& out) {
  out.resize(phase_count());
  const double alpha = spec_.attenuation_ratio;

  if (kind_ == Kind::kMfsim) {
    const auto& mfsim = std::get<MfsimSpec>(spec_.variant);
    const double half_amp = 0.5 * traversal_amplitude(alpha, 2);
    const Eigen::VectorXcd q =
        (couplings_->input.array() * gbar.array().conjugate())
            .rowwise()
            .sum()
            .matrix();
    const int second = mfsim.layers[1].atom_count();
    const int first = mfsim.layers[0].atom_count();
    for (int n = 0; n < second; ++n) {
      const auto [a, b] = mfsim.topology.pairs[n];
      const std::complex<double> common =
          half_amp * q(n) * std::polar(1.0, config.phases[1](n));
      out(a) = -2.0 * std::imag(common * std::polar(1.0, config.phases[0](a)));
      out(b) = -2.0 * std::imag(common * std::polar(1.0, config.phases[0](b)));
      out(first + n) = -2.0 * std::imag(mfsim_gains_(n) * q(n));
    }
    return;
  }

  const int stages = num_stages_;
  scratch_b_ = traversal_amplitude(alpha, stages) * gbar;  // adjoint at last stage
  Eigen::Index offset = out.size();
  for (int l = stages - 1; l >= 0; --l) {
    const Eigen::Index count = factors_[l].size();
    offset -= count;
    for (Eigen::Index n = 0; n < count; ++n) {
      const std::complex<double> s =
          pre_phase_[l].row(n).dot(scratch_b_.row(n));  // conj(a) . b form
      // dot conjugates the left argument; we need sum a * conj(v).
      out(offset + n) = -2.0 * std::imag(factors_[l](n) * std::conj(s));
    }
    if (l > 0) {
      const Eigen::MatrixXcd& coupling =
          (kind_ == Kind::kFilm) ? *film_active_ : couplings_->inter[l - 1];
      scratch_a_ = factors_[l].conjugate().asDiagonal() * scratch_b_;
      scratch_b_.noalias() = coupling.adjoint() * scratch_a_;
    }
  }
}

void ResponseEvaluator::displacement_gradient(const SimConfig& config,
                                              const Eigen::MatrixXcd& gbar,
                                              Eigen::VectorXd& out) {
  out.resize(displacement_count());
  if (kind_ != Kind::kFilm) {
    out.setZero();
    return;
  }
  const auto& film = std::get<FilmSpec>(spec_.variant);
  const double amp = traversal_amplitude(spec_.attenuation_ratio, 2);
  const int n_src = film.layers[0].atom_count();
  const int n_dst = film.layers[1].atom_count();

  // dObj = 2 Re sum_{m,n} K(n, m) dW(m, n), with
  // K = (Phi_1 W_in) (gbar^H) (amp Phi_2).
  const Eigen::MatrixXcd post_first =
      factors_[0].asDiagonal() * pre_phase_[0];
  Eigen::MatrixXcd k_matrix = post_first * gbar.adjoint();
  k_matrix.array().rowwise() *= (amp * factors_[1]).transpose().array();

  const Eigen::Matrix<double, Eigen::Dynamic, 3> src =
      couplings_->film_src + config.displacements[0].offsets;
  const Eigen::Matrix<double, Eigen::Dynamic, 3> dst =
      couplings_->film_dst + config.displacements[1].offsets;

  out.setZero();
  auto src_grad = [&](int n, int j) -> double& { return out(3 * n + j); };
  auto dst_grad = [&](int m, int j) -> double& {
    return out(3 * (n_src + m) + j);
  };
  for (int n = 0; n < n_src; ++n) {
    const Eigen::Vector3d src_pos = src.row(n);
    for (int m = 0; m < n_dst; ++m) {
      const RsCoefficientJet jet = rs_coefficient_jet(
          src_pos, dst.row(m), lambda_, couplings_->film_src_area);
      const std::complex<double> weight = k_matrix(n, m);
      for (int j = 0; j < 3; ++j) {
        const double contribution = 2.0 * std::real(weight * jet.d_dst(j));
        dst_grad(m, j) += contribution;
        src_grad(n, j) -= contribution;
      }
    }
  }
}

}  // namespace simstack
