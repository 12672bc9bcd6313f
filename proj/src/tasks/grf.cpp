#include "rwf/tasks/grf.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "ad/eigen_view.hpp"
#include "rwf/core/errors.hpp"

namespace rwf::tasks {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw ArgumentError("linspace needs at least one point");
  std::vector<double> out(n, lo);
  if (n == 1) return out;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + h * static_cast<double>(i);
  out.back() = hi;
  return out;
}

Tensor se_kernel(const std::vector<double>& grid, double length_scale) {
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) throw ArgumentError("kernel length scale must be positive");
  const std::size_t n = grid.size();
  Tensor k = Tensor::matrix(n, n);
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double d = grid[i] - grid[j];
      k(i, j) = k(j, i) = std::exp(-d * d * inv);
    }
  }
  return k;
}

GrfSampler::GrfSampler(std::vector<double> grid, double length_scale) : grid_(std::move(grid)) {
  if (grid_.empty()) throw ArgumentError("GRF grid is empty");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) throw ArgumentError("GRF grid must be strictly increasing");
  }
  const Tensor k = se_kernel(grid_, length_scale);
  const std::size_t n = grid_.size();
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix base = detail::view(k);
  for (double jitter : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
    Matrix m = base;
    m.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) continue;
    Matrix l = llt.matrixL();
    if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) continue;
    factor_ = Tensor::matrix(n, n);
    detail::view(factor_) = l;
    jitter_ = jitter;
    return;
  }
  throw NumericalError("GRF covariance (l = " + std::to_string(length_scale) +
                       ") is not positive definite even with jitter 1e-4");
}

std::vector<double> GrfSampler::sample(Rng& rng) const {
  const std::size_t n = grid_.size();
  std::vector<double> z(n);
  for (double& v : z) v = normal(rng);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += factor_(i, j) * z[j];
    out[i] = s;
  }
  return out;
}

Tensor GrfSampler::sample_batch(Rng& rng, std::size_t n) const {
  Tensor out = Tensor::matrix(n, grid_.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = sample(rng);
    std::copy(s.begin(), s.end(), out.ptr() + r * grid_.size());
  }
  return out;
}

std::vector<double> sample_grf(Rng& rng, const std::vector<double>& grid, double length_scale) {
  return GrfSampler(grid, length_scale).sample(rng);
}

}  // namespace rwf::tasks
