// SPDX-License-Identifier: Apache-2.0

#include "simstack/propagation.hpp"

#include <cmath>
#include <stdexcept>

#include "simstack/rng.hpp"

namespace simstack {

Eigen::Matrix<double, Eigen::Dynamic, 3> LayerGeometry::atom_positions() const {
  Eigen::Matrix<double, Eigen::Dynamic, 3> positions(atom_count(), 3);
  for (int n = 0; n < atom_count(); ++n) positions.row(n) = atom_position(n);
  return positions;
}

void LayerGeometry::validate() const {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("LayerGeometry: rows and cols must be >= 1");
  if (!(atom_spacing > 0.0))
    throw std::invalid_argument("LayerGeometry: atom_spacing must be > 0");
  if (!(atom_area > 0.0))
    throw std::invalid_argument("LayerGeometry: atom_area must be > 0");
  if (!(z_offset >= 0.0))
    throw std::invalid_argument("LayerGeometry: z_offset must be >= 0");
}

LayerGeometry feed_array_geometry(int antennas, double lambda) {
  if (antennas < 1)
    throw std::invalid_argument("feed_array_geometry: antennas must be >= 1");
  if (!(lambda > 0.0))
    throw std::invalid_argument("feed_array_geometry: lambda must be > 0");
  // Feed elements are modeled as half-wave dipoles: effective aperture
  // G lambda^2 / (4 pi) with G = 1.643.
  LayerGeometry feed;
  feed.rows = 1;
  feed.cols = antennas;
  feed.atom_spacing = 0.5 * lambda;
  feed.atom_area = 1.643 * lambda * lambda / (4.0 * kPi);
  feed.z_offset = 0.0;
  return feed;
}

double wavelength(double carrier_hz) {
  if (!(carrier_hz > 0.0))
    throw std::domain_error("wavelength: carrier frequency must be > 0");
  return kSpeedOfLight / carrier_hz;
}

std::complex<double> rs_coefficient(const Eigen::Vector3d& src,
                                    const Eigen::Vector3d& dst, double lambda,
                                    double area) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("rs_coefficient: lambda must be > 0");
  if (!(area > 0.0))
    throw std::invalid_argument("rs_coefficient: area must be > 0");
  const Eigen::Vector3d diff = dst - src;
  const double d = diff.norm();
  if (d == 0.0)
    throw std::domain_error("rs_coefficient: coincident atom positions");
  const double cos_chi = std::abs(diff.z()) / d;
  const std::complex<double> radial(1.0 / (2.0 * kPi * d), -1.0 / lambda);
  return (area * cos_chi / d) * radial * std::polar(1.0, 2.0 * kPi * d / lambda);
}

RsCoefficientJet rs_coefficient_jet(const Eigen::Vector3d& src,
                                    const Eigen::Vector3d& dst, double lambda,
                                    double area) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("rs_coefficient_jet: lambda must be > 0");
  if (!(area > 0.0))
    throw std::invalid_argument("rs_coefficient_jet: area must be > 0");
  const Eigen::Vector3d diff = dst - src;
  const double d = diff.norm();
  if (d == 0.0)
    throw std::domain_error("rs_coefficient_jet: coincident atom positions");

  // w = area * |dz| * f(d) * e^{ikd},  f(d) = 1/(2 pi d^3) - i/(lambda d^2)
  const double k = 2.0 * kPi / lambda;
  const double dz = diff.z();
  const double abs_dz = std::abs(dz);
  const std::complex<double> phase = std::polar(1.0, k * d);
  const std::complex<double> f(1.0 / (2.0 * kPi * d * d * d),
                               -1.0 / (lambda * d * d));
  const std::complex<double> fprime(-3.0 / (2.0 * kPi * d * d * d * d),
                                    2.0 / (lambda * d * d * d));
  const std::complex<double> i_unit(0.0, 1.0);

  RsCoefficientJet jet;
  jet.value = area * abs_dz * f * phase;

  // Radial part: d depends on all three components through u_j / d.
  const std::complex<double> radial = area * abs_dz * (fprime + i_unit * k * f) * phase / d;
  jet.d_dst = radial * diff.cast<std::complex<double>>();
  // |dz| contributes an extra term to the z derivative.
  if (dz != 0.0) {
    jet.d_dst(2) += area * std::copysign(1.0, dz) * f * phase;
  }
  return jet;
}

ComplexCoupling build_coupling(const LayerGeometry& src,
                               const LayerGeometry& dst, double lambda) {
  src.validate();
  dst.validate();
  if (!(dst.z_offset > src.z_offset))
    throw std::domain_error(
        "build_coupling: destination layer must sit strictly beyond the "
        "source layer along the stack axis");
  return build_coupling(src.atom_positions(), dst.atom_positions(), lambda,
                        src.atom_area);
}

ComplexCoupling build_coupling(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& src_positions,
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& dst_positions,
    double lambda, double src_area) {
  const Eigen::Index n_src = src_positions.rows();
  const Eigen::Index n_dst = dst_positions.rows();
  ComplexCoupling coupling(n_dst, n_src);
  for (Eigen::Index n = 0; n < n_src; ++n) {
    const Eigen::Vector3d src = src_positions.row(n);
    for (Eigen::Index m = 0; m < n_dst; ++m) {
      coupling(m, n) =
          rs_coefficient(src, dst_positions.row(m), lambda, src_area);
    }
  }
  return coupling;
}

double path_loss(double distance_m, double exponent, double lambda) {
  if (!(distance_m >= 1.0))
    throw std::domain_error("path_loss: distance below the 1 m reference");
  if (!(exponent > 0.0))
    throw std::domain_error("path_loss: exponent must be > 0");
  if (!(lambda > 0.0))
    throw std::domain_error("path_loss: lambda must be > 0");
  const double reference = lambda / (4.0 * kPi);
  return reference * reference * std::pow(distance_m, -exponent);
}

ChannelRealization rayleigh_channel(int rx, int tx, double mean_power,
                                    std::uint64_t seed) {
  if (rx < 1 || tx < 1)
    throw std::invalid_argument("rayleigh_channel: dimensions must be >= 1");
  if (!(mean_power > 0.0))
    throw std::invalid_argument("rayleigh_channel: mean_power must be > 0");
  ChannelRealization channel;
  channel.seed = seed;
  channel.mean_power = mean_power;
  channel.matrix.resize(rx, tx);
  Rng rng(seed);
  for (int c = 0; c < tx; ++c)
    for (int r = 0; r < rx; ++r)
      channel.matrix(r, c) = rng.next_cgaussian(mean_power);
  return channel;
}

Eigen::VectorXcd steering_vector(double azimuth_rad, double elevation_rad,
                                 const LayerGeometry& geometry, double lambda) {
  geometry.validate();
  if (!(lambda > 0.0))
    throw std::invalid_argument("steering_vector: lambda must be > 0");
  const Eigen::Vector3d direction(
      std::cos(elevation_rad) * std::sin(azimuth_rad), std::sin(elevation_rad),
      std::cos(elevation_rad) * std::cos(azimuth_rad));
  const double k = 2.0 * kPi / lambda;
  Eigen::VectorXcd response(geometry.atom_count());
  for (int n = 0; n < geometry.atom_count(); ++n)
    response(n) = std::polar(1.0, k * geometry.atom_position(n).dot(direction));
  return response;
}

}  // namespace simstack
