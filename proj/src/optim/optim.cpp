#include "rwf/optim/optim.hpp"

#include <cmath>

#include "rwf/core/errors.hpp"

namespace rwf::optim {
namespace {

void check_aligned(const ad::ParamSet& params, const ad::ParamGradients& grads) {
  if (grads.values.size() != params.count()) {
    throw DimensionError("gradient count " + std::to_string(grads.values.size()) + " does not match " +
                         std::to_string(params.count()) + " parameters");
  }
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (grads.values[i].shape() != params.values()[i].shape()) {
      throw DimensionError("gradient for '" + params.names()[i] + "' has shape " +
                           shape_string(grads.values[i].shape()) + ", parameter has " +
                           shape_string(params.values()[i].shape()));
    }
  }
}

}  // namespace

void Schedule::validate() const {
  if (!(base_rate > 0.0) || !std::isfinite(base_rate)) throw ArgumentError("base learning rate must be positive");
  if (decay_steps > 0 && !(decay_rate > 0.0 && decay_rate <= 1.0)) {
    throw ArgumentError("decay rate must lie in (0, 1]");
  }
}

double rate_at(const Schedule& s, std::size_t t) {
  if (t < s.warmup_steps) {
    return s.base_rate * static_cast<double>(t) / static_cast<double>(s.warmup_steps);
  }
  if (s.decay_steps == 0) return s.base_rate;
  const double elapsed = static_cast<double>(t - s.warmup_steps) / static_cast<double>(s.decay_steps);
  return s.base_rate * std::pow(s.decay_rate, s.staircase ? std::floor(elapsed) : elapsed);
}

AdamState AdamState::zeros_like(const ad::ParamSet& params) {
  AdamState s;
  for (const auto& p : params.values()) {
    s.m.emplace_back(p.shape(), 0.0);
    s.v.emplace_back(p.shape(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, ad::ParamSet& params, const ad::ParamGradients& grads, double rate,
               std::size_t iteration) {
  check_aligned(params, grads);
  if (state.m.size() != params.count()) throw DimensionError("Adam state does not match the parameter set");
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (!grads.values[i].all_finite()) {
      throw TrainingDiverged(iteration, "non-finite gradient for '" + params.names()[i] + "'");
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& w = params.values()[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads.values[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= rate * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void sgd_step(ad::ParamSet& params, const ad::ParamGradients& grads, double eta) {
  check_aligned(params, grads);
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& w = params.values()[i];
    const Tensor& g = grads.values[i];
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= eta * g[k];
  }
}

}  // namespace rwf::optim
