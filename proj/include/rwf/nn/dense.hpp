#pragma once

#include <string>
#include <string_view>

#include "rwf/ad/param_set.hpp"
#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::nn {

enum class Activation { kLinear, kTanh, kRelu, kGelu };

/// How a dense layer stores its weight matrix.
///   kPlain          W
///   kAdaptive       W, plus per-neuron activation slopes a (output = act(a * (Wx + b)))
///   kWeightNorm     W = diag(g / ||v_k||) V
///   kFactorized     W = diag(exp(s)) V       (random weight factorization)
///   kFactorizedRaw  W = diag(s) V            (raw scales; used by the theorem checks)
enum class Parameterization { kPlain, kAdaptive, kWeightNorm, kFactorized, kFactorizedRaw };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a) noexcept;
Parameterization parse_parameterization(std::string_view name);
std::string_view to_string(Parameterization p) noexcept;

ad::Var apply_activation(ad::Tape& tape, ad::Var x, Activation activation);

/// Mean and standard deviation of the log-scale factors s ~ N(mu, sigma^2).
struct FactorizationInit {
  double mu = 1.0;
  double sigma = 0.1;
};

/// Glorot-normal matrix of shape (fan_out, fan_in): entries ~ N(0, 2 / (fan_in + fan_out)).
Tensor glorot_init(Rng& rng, std::size_t fan_out, std::size_t fan_in);

struct FactorizedWeights {
  Tensor log_scale;  // s, one per output neuron
  Tensor direction;  // V = diag(exp(-s)) W
};

/// Draws s ~ N(mu, sigma^2) per row of `weight` and returns (s, V) with diag(exp(s)) V == W.
FactorizedWeights rwf_init(Rng& rng, const Tensor& weight, double mu, double sigma);

/// Dense layer y = act(W x + b) under one of the parameterizations above.
///
/// The effective weight is recomputed from the stored factors on every forward pass,
/// so it can never go stale with respect to the trainable tensors. Biases are never
/// factorized.
class DenseLayer {
 public:
  /// Glorot-initialized weight converted into the requested parameterization.
  /// `has_activation` is false for the linear readout; adaptive layers then carry no slope.
  static DenseLayer create(ad::ParamSet& params, Rng& rng, const std::string& name, std::size_t fan_in,
                           std::size_t fan_out, Parameterization kind, const FactorizationInit& init,
                           bool has_activation = true);

  /// Same, from an explicit plain weight and bias. Every parameterization reproduces
  /// the plain layer exactly at construction (up to rounding).
  static DenseLayer from_weights(ad::ParamSet& params, Rng& rng, const std::string& name, const Tensor& weight,
                                 const Tensor& bias, Parameterization kind, const FactorizationInit& init,
                                 bool has_activation = true);

  ad::Var weight(ad::Tape& tape) const;
  ad::Var apply(ad::Tape& tape, ad::Var x, Activation activation) const;

  /// Effective (unfactorized) weight computed from the current parameter values.
  Tensor effective_weight(const ad::ParamSet& params) const;

  const std::string& name() const noexcept { return name_; }
  Parameterization kind() const noexcept { return kind_; }
  std::size_t fan_in() const noexcept { return fan_in_; }
  std::size_t fan_out() const noexcept { return fan_out_; }
  ad::ParamId weight_id() const noexcept { return weight_; }
  ad::ParamId bias_id() const noexcept { return bias_; }
  /// s for factorized layers, g for weight norm, a for adaptive layers with a slope.
  bool has_scale() const noexcept { return has_scale_; }
  ad::ParamId scale_id() const noexcept { return scale_; }

 private:
  std::string name_;
  Parameterization kind_ = Parameterization::kPlain;
  std::size_t fan_in_ = 0;
  std::size_t fan_out_ = 0;
  ad::ParamId weight_{};
  ad::ParamId bias_{};
  ad::ParamId scale_{};
  bool has_scale_ = false;
};

}  // namespace rwf::nn
