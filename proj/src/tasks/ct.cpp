#include "rwf/tasks/ct.hpp"

#include <cmath>
#include <numbers>

#include "rwf/core/errors.hpp"

namespace rwf::tasks {
namespace {

double ellipse_sum(const std::vector<Ellipse>& ellipses, double x, double y) {
  double v = 0.0;
  for (const auto& e : ellipses) {
    const double phi = e.phi_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    const double dx = x - e.x0, dy = y - e.y0;
    const double u = dx * c + dy * s;
    const double w = -dx * s + dy * c;
    if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.value;
  }
  return v;
}

// Visits the bilinear weights of every quadrature sample along one ray.
template <typename Visit>
void trace_ray(std::size_t n, double angle, double offset, Visit&& visit) {
  const double nd = static_cast<double>(n);
  const double step = 1.0 / nd;  // half a pixel of the [-1, 1] square
  const auto count = static_cast<std::size_t>(std::ceil(2.0 * std::numbers::sqrt2 * nd));
  const double half = 0.5 * static_cast<double>(count) * step;
  const double ct = std::cos(angle), st = std::sin(angle);
  for (std::size_t k = 0; k < count; ++k) {
    const double tau = -half + (static_cast<double>(k) + 0.5) * step;
    const double x = offset * ct - tau * st;
    const double y = offset * st + tau * ct;
    // Continuous pixel indices; centers sit on integers.
    const double fc = (x + 1.0) * nd / 2.0 - 0.5;
    const double fr = (1.0 - y) * nd / 2.0 - 0.5;
    const double c0 = std::floor(fc), r0 = std::floor(fr);
    const double tc = fc - c0, tr = fr - r0;
    const long ic = static_cast<long>(c0), ir = static_cast<long>(r0);
    const double w[4] = {(1 - tr) * (1 - tc), (1 - tr) * tc, tr * (1 - tc), tr * tc};
    const long rr[4] = {ir, ir, ir + 1, ir + 1};
    const long cc[4] = {ic, ic + 1, ic, ic + 1};
    for (int q = 0; q < 4; ++q) {
      if (rr[q] < 0 || cc[q] < 0 || rr[q] >= static_cast<long>(n) || cc[q] >= static_cast<long>(n)) continue;
      if (w[q] == 0.0) continue;
      visit(static_cast<std::size_t>(rr[q]) * n + static_cast<std::size_t>(cc[q]), w[q] * step);
    }
  }
}

}  // namespace

std::vector<Ellipse> shepp_logan() {
  return {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},            {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},       {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},       {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},     {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
}

std::vector<Ellipse> perturbed_shepp_logan(Rng& rng, double amount) {
  if (amount < 0.0) throw ArgumentError("perturbation amount must be non-negative");
  auto table = shepp_logan();
  for (std::size_t i = 1; i < table.size(); ++i) {  // keep the skull fixed
    auto& e = table[i];
    e.a *= 1.0 + uniform(rng, -amount, amount);
    e.b *= 1.0 + uniform(rng, -amount, amount);
    e.x0 += uniform(rng, -amount, amount) * 0.2;
    e.y0 += uniform(rng, -amount, amount) * 0.2;
    e.phi_deg += uniform(rng, -amount, amount) * 30.0;
  }
  return table;
}

Tensor rasterize(const std::vector<Ellipse>& ellipses, std::size_t n, std::size_t supersample) {
  if (n == 0 || supersample == 0) throw ArgumentError("raster size must be positive");
  Tensor img = Tensor::matrix(n, n);
  const double px = 2.0 / static_cast<double>(n);
  const double ss = static_cast<double>(supersample);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < supersample; ++i) {
        for (std::size_t j = 0; j < supersample; ++j) {
          const double x = -1.0 + (static_cast<double>(c) + (static_cast<double>(j) + 0.5) / ss) * px;
          const double y = 1.0 - (static_cast<double>(r) + (static_cast<double>(i) + 0.5) / ss) * px;
          acc += ellipse_sum(ellipses, x, y);
        }
      }
      img(r, c) = acc / (ss * ss);
    }
  }
  return img;
}

Tensor raster_coordinates(std::size_t n) {
  Tensor xy = Tensor::matrix(n * n, 2);
  const double px = 2.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      xy(r * n + c, 0) = -1.0 + (static_cast<double>(c) + 0.5) * px;
      xy(r * n + c, 1) = 1.0 - (static_cast<double>(r) + 0.5) * px;
    }
  }
  return xy;
}

std::vector<double> projection_angles(std::size_t count) {
  if (count == 0) throw ArgumentError("need at least one projection angle");
  std::vector<double> a(count);
  for (std::size_t i = 0; i < count; ++i) a[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
  return a;
}

double detector_offset(std::size_t bin, std::size_t bins) {
  return -1.0 + (static_cast<double>(bin) + 0.5) * 2.0 / static_cast<double>(bins);
}

std::vector<double> radon_project(const Tensor& raster, double angle, std::size_t bins) {
  if (raster.rank() != 2 || raster.rows() != raster.cols()) {
    throw DimensionError("radon_project needs a square raster, got " + shape_string(raster.shape()));
  }
  if (bins == 0) throw ArgumentError("radon_project needs at least one detector bin");
  const std::size_t n = raster.rows();
  std::vector<double> proj(bins, 0.0);
  for (std::size_t j = 0; j < bins; ++j) {
    double s = 0.0;
    trace_ray(n, angle, detector_offset(j, bins), [&](std::size_t idx, double w) { s += w * raster[idx]; });
    proj[j] = s;
  }
  return proj;
}

Sinogram radon_transform(const Tensor& raster, const std::vector<double>& angles, std::size_t bins) {
  Sinogram s{angles, bins, Tensor::matrix(angles.size(), bins)};
  for (std::size_t a = 0; a < angles.size(); ++a) {
    const auto p = radon_project(raster, angles[a], bins);
    std::copy(p.begin(), p.end(), s.data.ptr() + a * bins);
  }
  return s;
}

Tensor projection_matrix(std::size_t n, const std::vector<double>& angles, std::size_t bins) {
  Tensor p = Tensor::matrix(angles.size() * bins, n * n);
  for (std::size_t a = 0; a < angles.size(); ++a) {
    for (std::size_t j = 0; j < bins; ++j) {
      double* row = p.ptr() + (a * bins + j) * n * n;
      trace_ray(n, angles[a], detector_offset(j, bins), [&](std::size_t idx, double w) { row[idx] += w; });
    }
  }
  return p;
}

ad::Var ct_loss(ad::Tape& tape, ad::Var density, ad::Var projection, ad::Var sinogram) {
  ad::Tape::Scope scope(tape, "ct_loss");
  return tape.mean(tape.square(tape.sub(tape.matmul(projection, density), sinogram)));
}

}  // namespace rwf::tasks
