#include <algorithm>
#include <cmath>
#include <string>

#include "ad/eigen_view.hpp"
#include "rwf/analysis/analysis.hpp"
#include "rwf/core/errors.hpp"

namespace rwf::analysis {

Tensor parameter_jacobian(const ad::ParamSet& params, const NetBuilder& net, const Tensor& inputs) {
  if (inputs.rank() != 2) throw DimensionError("NTK inputs must be a matrix, got " + shape_string(inputs.shape()));
  ad::Tape tape(params);
  ad::Var in = tape.placeholder("ntk_input");
  tape.bind(in, net(tape, in));
  const std::size_t n = inputs.rows(), d = inputs.cols(), p = params.total_size();
  Tensor jac = Tensor::matrix(n, p);
  Tensor row = Tensor::matrix(1, d);
  const Tensor seed = Tensor::matrix(1, 1, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(inputs.ptr() + i * d, d, row.ptr());
    const Tensor out = tape.forward(row);
    if (out.size() != 1) throw DimensionError("NTK needs a scalar output, got " + shape_string(out.shape()));
    const auto g = tape.backward(seed).flatten();
    std::copy(g.begin(), g.end(), jac.ptr() + i * p);
  }
  return jac;
}

Tensor empirical_ntk(const ad::ParamSet& params, const NetBuilder& net, const Tensor& inputs) {
  const Tensor jac = parameter_jacobian(params, net, inputs);
  const std::size_t n = jac.rows();
  Tensor k = Tensor::matrix(n, n);
  auto j = detail::view(jac);
  detail::view(k).noalias() = j * j.transpose();
  // The product is symmetric up to rounding; make it exact.
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      const double avg = 0.5 * (k(r, c) + k(c, r));
      k(r, c) = k(c, r) = avg;
    }
  }
  return k;
}

std::vector<double> ntk_eigenvalues(const Tensor& k) {
  if (k.rank() != 2 || k.rows() != k.cols()) {
    throw ArgumentError("eigenvalues need a square matrix, got " + shape_string(k.shape()));
  }
  const std::size_t n = k.rows();
  const double scale = k.max_abs();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      if (std::abs(k(r, c) - k(c, r)) > 1e-10 * scale) {
        throw ArgumentError("matrix is not symmetric at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    }
  }
  std::vector<double> a(k.data().begin(), k.data().end());
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };
  double total = 0.0;
  for (double v : a) total += v * v;
  const double target = 1e-10 * std::sqrt(total);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (r != c) s += at(r, c) * at(r, c);
      }
    }
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  while (off_norm() > target) {
    if (++sweep > kMaxSweeps) throw NumericalError("Jacobi eigenvalue sweeps did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = at(r, p), arq = at(r, q);
          at(r, p) = at(p, r) = c * arp - s * arq;
          at(r, q) = at(q, r) = s * arp + c * arq;
        }
        at(p, p) -= t * apq;
        at(q, q) += t * apq;
        at(p, q) = at(q, p) = 0.0;
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

double relative_weight_change(const std::vector<double>& now, const std::vector<double>& init) {
  if (now.size() != init.size()) {
    throw DimensionError("weight vectors differ in size: " + std::to_string(now.size()) + " vs " +
                         std::to_string(init.size()));
  }
  double diff = 0.0, base = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    diff += (now[i] - init[i]) * (now[i] - init[i]);
    base += init[i] * init[i];
  }
  if (base == 0.0) throw ArgumentError("initial weights have zero norm");
  return std::sqrt(diff / base);
}

}  // namespace rwf::analysis
