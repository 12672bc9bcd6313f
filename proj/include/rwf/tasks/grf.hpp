#pragma once

#include <vector>

#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::tasks {

/// K_ij = exp(-(x_i - x_j)^2 / (2 l^2)).
Tensor se_kernel(const std::vector<double>& grid, double length_scale);

/// Zero-mean Gaussian random field on a fixed 1D grid with a squared-exponential kernel.
/// The covariance is factorized once; samples are L z with z ~ N(0, I).
class GrfSampler {
 public:
  /// Tries jitter 0, 1e-12, 1e-11, ..., 1e-4 on the diagonal until the Cholesky
  /// factorization succeeds; throws NumericalError otherwise.
  GrfSampler(std::vector<double> grid, double length_scale);

  std::vector<double> sample(Rng& rng) const;
  /// n samples as rows of an [n x grid] matrix.
  Tensor sample_batch(Rng& rng, std::size_t n) const;

  const std::vector<double>& grid() const noexcept { return grid_; }
  double jitter() const noexcept { return jitter_; }
  /// Lower-triangular factor, row-major.
  const Tensor& factor() const noexcept { return factor_; }

 private:
  std::vector<double> grid_;
  double jitter_ = 0.0;
  Tensor factor_;
};

std::vector<double> sample_grf(Rng& rng, const std::vector<double>& grid, double length_scale);

/// n equispaced points on [lo, hi] including both ends.
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace rwf::tasks
