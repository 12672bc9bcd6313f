#include "rwf/nn/dense.hpp"

#include <algorithm>
#include <cmath>

#include "rwf/core/errors.hpp"

namespace rwf::nn {

Activation parse_activation(std::string_view name) {
  if (name == "linear" || name == "identity") return Activation::kLinear;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kGelu: return "gelu";
  }
  return "?";
}

Parameterization parse_parameterization(std::string_view name) {
  if (name == "plain") return Parameterization::kPlain;
  if (name == "aa") return Parameterization::kAdaptive;
  if (name == "wn") return Parameterization::kWeightNorm;
  if (name == "rwf") return Parameterization::kFactorized;
  if (name == "rwf_raw") return Parameterization::kFactorizedRaw;
  throw ArgumentError("unknown parameterization '" + std::string(name) + "'");
}

std::string_view to_string(Parameterization p) noexcept {
  switch (p) {
    case Parameterization::kPlain: return "plain";
    case Parameterization::kAdaptive: return "aa";
    case Parameterization::kWeightNorm: return "wn";
    case Parameterization::kFactorized: return "rwf";
    case Parameterization::kFactorizedRaw: return "rwf_raw";
  }
  return "?";
}

ad::Var apply_activation(ad::Tape& tape, ad::Var x, Activation activation) {
  switch (activation) {
    case Activation::kLinear: return x;
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kRelu: return tape.relu(x);
    case Activation::kGelu: return tape.gelu(x);
  }
  return x;
}

Tensor glorot_init(Rng& rng, std::size_t fan_out, std::size_t fan_in) {
  if (fan_out == 0 || fan_in == 0) {
    throw ArgumentError("glorot_init needs non-zero dimensions, got " + std::to_string(fan_out) + "x" +
                        std::to_string(fan_in));
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  Tensor w = Tensor::matrix(fan_out, fan_in);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : w.data()) v = dist(rng);
  return w;
}

FactorizedWeights rwf_init(Rng& rng, const Tensor& weight, double mu, double sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma)) throw ArgumentError("rwf_init: mu and sigma must be finite");
  if (sigma < 0.0) throw ArgumentError("rwf_init: sigma must be non-negative");
  if (weight.rank() != 2) throw DimensionError("rwf_init expects a matrix, got " + shape_string(weight.shape()));
  const std::size_t rows = weight.rows(), cols = weight.cols();
  FactorizedWeights out{Tensor(Shape{rows}), Tensor(weight.shape())};
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = sigma > 0.0 ? normal(rng, mu, sigma) : mu;
    out.log_scale[r] = s;
    const double inv = std::exp(-s);
    for (std::size_t c = 0; c < cols; ++c) out.direction(r, c) = weight(r, c) * inv;
  }
  return out;
}

DenseLayer DenseLayer::create(ad::ParamSet& params, Rng& rng, const std::string& name, std::size_t fan_in,
                              std::size_t fan_out, Parameterization kind, const FactorizationInit& init,
                              bool has_activation) {
  Tensor w = glorot_init(rng, fan_out, fan_in);
  return from_weights(params, rng, name, w, Tensor(Shape{fan_out}, 0.0), kind, init, has_activation);
}

DenseLayer DenseLayer::from_weights(ad::ParamSet& params, Rng& rng, const std::string& name, const Tensor& weight,
                                    const Tensor& bias, Parameterization kind, const FactorizationInit& init,
                                    bool has_activation) {
  if (weight.rank() != 2) throw DimensionError("layer '" + name + "': weight must be a matrix");
  if (bias.size() != weight.rows()) {
    throw DimensionError("layer '" + name + "': bias length " + std::to_string(bias.size()) +
                         " does not match fan_out " + std::to_string(weight.rows()));
  }
  DenseLayer layer;
  layer.name_ = name;
  layer.kind_ = kind;
  layer.fan_out_ = weight.rows();
  layer.fan_in_ = weight.cols();
  const Tensor bias_vec(Shape{weight.rows()}, std::vector<double>(bias.data().begin(), bias.data().end()));

  switch (kind) {
    case Parameterization::kPlain:
      layer.weight_ = params.add(name + ".W", weight);
      break;
    case Parameterization::kAdaptive:
      layer.weight_ = params.add(name + ".W", weight);
      if (has_activation) {
        layer.scale_ = params.add(name + ".a", Tensor(Shape{weight.rows()}, 1.0));
        layer.has_scale_ = true;
      }
      break;
    case Parameterization::kWeightNorm: {
      Tensor g(Shape{weight.rows()});
      for (std::size_t r = 0; r < weight.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < weight.cols(); ++c) s += weight(r, c) * weight(r, c);
        g[r] = std::sqrt(s);
      }
      layer.weight_ = params.add(name + ".V", weight);
      layer.scale_ = params.add(name + ".g", std::move(g));
      layer.has_scale_ = true;
      break;
    }
    case Parameterization::kFactorized: {
      FactorizedWeights f = rwf_init(rng, weight, init.mu, init.sigma);
      layer.weight_ = params.add(name + ".V", std::move(f.direction));
      layer.scale_ = params.add(name + ".s", std::move(f.log_scale));
      layer.has_scale_ = true;
      break;
    }
    case Parameterization::kFactorizedRaw: {
      FactorizedWeights f = rwf_init(rng, weight, init.mu, init.sigma);
      for (double& s : f.log_scale.data()) s = std::exp(s);
      layer.weight_ = params.add(name + ".V", std::move(f.direction));
      layer.scale_ = params.add(name + ".s", std::move(f.log_scale));
      layer.has_scale_ = true;
      break;
    }
  }
  layer.bias_ = params.add(name + ".b", bias_vec);
  return layer;
}

ad::Var DenseLayer::weight(ad::Tape& tape) const {
  ad::Var v = tape.parameter(weight_);
  switch (kind_) {
    case Parameterization::kPlain:
    case Parameterization::kAdaptive:
      return v;
    case Parameterization::kWeightNorm:
      return tape.scale_rows(v, tape.div(tape.parameter(scale_), tape.row_norm(v)));
    case Parameterization::kFactorized:
      return tape.scale_rows(v, tape.exp(tape.parameter(scale_)));
    case Parameterization::kFactorizedRaw:
      return tape.scale_rows(v, tape.parameter(scale_));
  }
  return v;
}

ad::Var DenseLayer::apply(ad::Tape& tape, ad::Var x, Activation activation) const {
  ad::Tape::Scope scope(tape, name_);
  ad::Var pre = tape.add_bias(tape.linear(x, weight(tape)), tape.parameter(bias_));
  if (kind_ == Parameterization::kAdaptive && has_scale_ && activation != Activation::kLinear) {
    pre = tape.scale_cols(pre, tape.parameter(scale_));
  }
  return apply_activation(tape, pre, activation);
}

Tensor DenseLayer::effective_weight(const ad::ParamSet& params) const {
  Tensor w = params[weight_];
  if (kind_ == Parameterization::kPlain || kind_ == Parameterization::kAdaptive) return w;
  const Tensor& scale = params[scale_];
  for (std::size_t r = 0; r < fan_out_; ++r) {
    double factor = 0.0;
    if (kind_ == Parameterization::kWeightNorm) {
      double s = 0.0;
      for (std::size_t c = 0; c < fan_in_; ++c) s += w(r, c) * w(r, c);
      factor = scale[r] / std::max(std::sqrt(s), 1e-12);
    } else if (kind_ == Parameterization::kFactorized) {
      factor = std::exp(scale[r]);
    } else {
      factor = scale[r];
    }
    for (std::size_t c = 0; c < fan_in_; ++c) w(r, c) *= factor;
  }
  return w;
}

}  // namespace rwf::nn
