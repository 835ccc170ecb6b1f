// SPDX-License-Identifier: Apache-2.0
//
// Physical-layer kernels for stacked-metasurface front ends: wavelengths,
// Rayleigh-Sommerfeld inter-layer coupling, distance-law path loss, Rayleigh
// fading draws and planar-array steering vectors. Everything here is a pure
// function of its inputs (seeds included) and safe to call concurrently.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>

namespace simstack {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Planar layer of meta-atoms: a centered rectangular grid in the x-y plane
/// at z_offset along the stack axis. Index order is row-major.
struct LayerGeometry {
  int rows = 1;
  int cols = 1;
  double atom_spacing = 0.0;  // m
  double atom_area = 0.0;     // m^2
  double z_offset = 0.0;      // m from the feed plane

  int atom_count() const { return rows * cols; }

  Eigen::Vector3d atom_position(int index) const {
    const int r = index / cols;
    const int c = index % cols;
    return {(c - 0.5 * (cols - 1)) * atom_spacing,
            (r - 0.5 * (rows - 1)) * atom_spacing, z_offset};
  }

  /// All atom positions as an atom_count x 3 matrix (row-major atom order).
  Eigen::Matrix<double, Eigen::Dynamic, 3> atom_positions() const;

  void validate() const;  // throws std::invalid_argument
};

/// Centered half-wavelength uniform linear array in the z = 0 plane, used as
/// the transmit feed in front of a stack.
LayerGeometry feed_array_geometry(int antennas, double lambda);

/// Inter-layer transmission matrix; entry (m, n) is the complex gain from
/// source atom n to destination atom m.
using ComplexCoupling = Eigen::MatrixXcd;

/// Seeded Rayleigh fading draw. Entries are i.i.d. circularly-symmetric
/// complex Gaussian with per-entry variance mean_power.
struct ChannelRealization {
  Eigen::MatrixXcd matrix;
  std::uint64_t seed = 0;
  double mean_power = 1.0;
};

/// c / f. Throws std::domain_error for non-positive frequencies.
double wavelength(double carrier_hz);

/// Rayleigh-Sommerfeld diffraction gain between two points:
///   w = (area * cos(chi) / d) * (1/(2*pi*d) - i/lambda) * exp(i*2*pi*d/lambda)
/// with d the separation and chi the angle to the stack axis,
/// cos(chi) = |dz| / d. Throws std::domain_error on coincident points.
std::complex<double> rs_coefficient(const Eigen::Vector3d& src,
                                    const Eigen::Vector3d& dst, double lambda,
                                    double area);

/// rs_coefficient together with its partial derivatives with respect to the
/// destination coordinates. Derivatives with respect to the source are the
/// negatives (the coefficient depends on dst - src only).
struct RsCoefficientJet {
  std::complex<double> value;
  Eigen::Vector3cd d_dst;
};
RsCoefficientJet rs_coefficient_jet(const Eigen::Vector3d& src,
                                    const Eigen::Vector3d& dst, double lambda,
                                    double area);

/// Assembles rs_coefficient over all atom pairs of two layers. The source
/// layer's atom_area enters each coefficient. Requires
/// dst.z_offset > src.z_offset.
ComplexCoupling build_coupling(const LayerGeometry& src,
                               const LayerGeometry& dst, double lambda);

/// Same, over explicit position lists (one row per atom); used for morphable
/// layers whose atoms sit away from their nominal grid.
ComplexCoupling build_coupling(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& src_positions,
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& dst_positions,
    double lambda, double src_area);

/// Free-space gain (lambda/4pi)^2 at the 1 m reference, then
/// distance^(-exponent) decay. Distances below 1 m are a domain error.
double path_loss(double distance_m, double exponent, double lambda);

/// rx x tx matrix of i.i.d. CN(0, mean_power) entries, filled in column-major
/// order from the seeded stream; identical seeds give bit-identical draws.
ChannelRealization rayleigh_channel(int rx, int tx, double mean_power,
                                    std::uint64_t seed);

/// Unit-modulus array response of a layer toward (azimuth, elevation).
/// Azimuth rotates in the x-z plane, elevation tilts toward y; broadside is
/// azimuth = elevation = 0 (direction +z, normal to the layer).
Eigen::VectorXcd steering_vector(double azimuth_rad, double elevation_rad,
                                 const LayerGeometry& geometry, double lambda);

}  // namespace simstack
