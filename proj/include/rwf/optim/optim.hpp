#pragma once

#include <cstddef>
#include <vector>

#include "rwf/ad/param_set.hpp"

namespace rwf::optim {

/// Learning-rate schedule: linear warmup from zero over `warmup_steps`, then
/// base_rate * decay_rate^(t' / decay_steps) with t' counted from the end of warmup.
/// decay_steps == 0 means constant after warmup. With `staircase` the exponent is floored.
struct Schedule {
  double base_rate = 1e-3;
  std::size_t warmup_steps = 0;
  std::size_t decay_steps = 0;
  double decay_rate = 1.0;
  bool staircase = false;

  void validate() const;
};

double rate_at(const Schedule& schedule, std::size_t t);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState zeros_like(const ad::ParamSet& params);
};

/// One bias-corrected Adam update. Throws TrainingDiverged (carrying `iteration`) when
/// any gradient entry is non-finite, leaving params and state untouched.
void adam_step(AdamState& state, ad::ParamSet& params, const ad::ParamGradients& grads, double rate,
               std::size_t iteration);

/// w <- w - eta * g.
void sgd_step(ad::ParamSet& params, const ad::ParamGradients& grads, double eta);

}  // namespace rwf::optim
