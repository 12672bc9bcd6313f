#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "rwf/ad/param_set.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::test {

/// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true value is
/// near zero from turning roundoff into a large relative error.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

/// Central differences of f with respect to every scalar in `params`.
inline std::vector<double> fd_gradient(ad::ParamSet& params, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g;
  for (auto& t : params.values()) {
    for (double& v : t.data()) {
      const double saved = v;
      v = saved + h;
      const double up = f();
      v = saved - h;
      const double down = f();
      v = saved;
      g.push_back((up - down) / (2.0 * h));
    }
  }
  return g;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
  return worst;
}

}  // namespace rwf::test
