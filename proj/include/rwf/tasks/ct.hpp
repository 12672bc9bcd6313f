#pragma once

#include <vector>

#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::tasks {

/// An ellipse on [-1, 1]^2: semi-axes (a, b), rotation phi in degrees, additive intensity.
struct Ellipse {
  double value;
  double a, b;
  double x0, y0;
  double phi_deg;
};

/// Modified Shepp-Logan phantom (Toft's higher-contrast variant of the 1974 Shepp-Logan
/// table, as used by MATLAB's phantom('Modified Shepp-Logan')). Densities lie in [0, 1].
std::vector<Ellipse> shepp_logan();

/// Shepp-Logan with each center, axis and angle jittered by up to `amount` (relative).
std::vector<Ellipse> perturbed_shepp_logan(Rng& rng, double amount);

/// Pixel (r, c) of an n x n raster has center x = -1 + (c + 1/2) 2/n, y = 1 - (r + 1/2) 2/n.
/// `supersample` > 1 averages s x s sub-pixel samples instead of the single center.
Tensor rasterize(const std::vector<Ellipse>& ellipses, std::size_t n, std::size_t supersample = 1);

/// Pixel-center coordinates of the raster above, [n*n x 2] as (x, y).
Tensor raster_coordinates(std::size_t n);

struct Sinogram {
  std::vector<double> angles;  // radians, evenly spaced over [0, pi)
  std::size_t bins = 0;
  Tensor data;                 // [angles x bins]
};

std::vector<double> projection_angles(std::size_t count);

/// Detector offsets d_j = -1 + (j + 1/2) 2/bins.
double detector_offset(std::size_t bin, std::size_t bins);

/// Line integrals of the raster (bilinear, zero outside) along rays
/// p(tau) = d (cos t, sin t) + tau (-sin t, cos t), midpoint rule in tau with a half-pixel step
/// over the [-1, 1]^2 square's diagonal.
std::vector<double> radon_project(const Tensor& raster, double angle, std::size_t bins);
Sinogram radon_transform(const Tensor& raster, const std::vector<double>& angles, std::size_t bins);

/// The same quadrature as a dense linear map: [angles*bins x n*n], row a*bins + j.
Tensor projection_matrix(std::size_t n, const std::vector<double>& angles, std::size_t bins);

/// mean((P f - g)^2) for a density column f [n*n x 1], the constant projection
/// matrix P and the flattened sinogram g [angles*bins x 1].
ad::Var ct_loss(ad::Tape& tape, ad::Var density, ad::Var projection, ad::Var sinogram);

}  // namespace rwf::tasks
