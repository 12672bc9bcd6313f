#include "rwf/nn/network.hpp"

#include "rwf/core/errors.hpp"

namespace rwf::nn {
namespace {

void check_spec(const MlpSpec& spec, const std::string& prefix) {
  if (spec.depth == 0) throw ArgumentError(prefix + ": depth must be at least 1");
  if (spec.width == 0 || spec.input_dim == 0 || spec.output_dim == 0) {
    throw ArgumentError(prefix + ": layer widths must be positive");
  }
}

void check_fan_in(const DenseLayer& layer, std::size_t expected) {
  if (layer.fan_in() != expected) {
    throw DimensionError("layer '" + layer.name() + "': fan_in " + std::to_string(layer.fan_in()) +
                         " does not match width " + std::to_string(expected));
  }
}

}  // namespace

Mlp Mlp::create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& spec) {
  check_spec(spec, prefix);
  Mlp net;
  net.spec_ = spec;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    net.layers_.push_back(DenseLayer::create(params, rng, prefix + ".h" + std::to_string(l), fan_in, spec.width,
                                             spec.parameterization, spec.rwf, true));
    fan_in = spec.width;
  }
  net.layers_.push_back(DenseLayer::create(params, rng, prefix + ".out", fan_in, spec.output_dim,
                                           spec.parameterization, spec.rwf, false));
  return net;
}

ad::Var Mlp::apply(ad::Tape& tape, ad::Var x) const {
  ad::Var h = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) h = layers_[l].apply(tape, h, spec_.activation);
  return layers_.back().apply(tape, h, Activation::kLinear);
}

ModifiedMlp ModifiedMlp::create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& spec) {
  check_spec(spec, prefix);
  auto make = [&](const std::string& name, std::size_t in, std::size_t out, bool act) {
    return DenseLayer::create(params, rng, prefix + "." + name, in, out, spec.parameterization, spec.rwf, act);
  };
  DenseLayer u = make("enc_u", spec.input_dim, spec.width, true);
  DenseLayer v = make("enc_v", spec.input_dim, spec.width, true);
  std::vector<DenseLayer> hidden;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    hidden.push_back(make("h" + std::to_string(l), l == 0 ? spec.input_dim : spec.width, spec.width, true));
  }
  DenseLayer out = make("out", spec.width, spec.output_dim, false);
  return from_layers(spec, std::move(u), std::move(v), std::move(hidden), std::move(out));
}

ModifiedMlp ModifiedMlp::from_layers(const MlpSpec& spec, DenseLayer encoder_u, DenseLayer encoder_v,
                                     std::vector<DenseLayer> hidden, DenseLayer readout) {
  if (hidden.empty()) throw ArgumentError("modified MLP needs at least one hidden layer");
  const std::size_t width = hidden.front().fan_out();
  for (const DenseLayer* enc : {&encoder_u, &encoder_v}) {
    if (enc->fan_out() != width) {
      throw DimensionError("layer '" + enc->name() + "': encoder width " + std::to_string(enc->fan_out()) +
                           " does not match hidden width " + std::to_string(width));
    }
  }
  if (encoder_u.fan_in() != hidden.front().fan_in() || encoder_v.fan_in() != hidden.front().fan_in()) {
    throw DimensionError("modified MLP encoders and first hidden layer must share the input width");
  }
  for (std::size_t l = 1; l < hidden.size(); ++l) {
    check_fan_in(hidden[l], width);
    if (hidden[l].fan_out() != width) {
      throw DimensionError("layer '" + hidden[l].name() + "': gate width " + std::to_string(hidden[l].fan_out()) +
                           " does not match hidden width " + std::to_string(width));
    }
  }
  check_fan_in(readout, width);
  ModifiedMlp net;
  net.spec_ = spec;
  net.spec_.width = width;
  net.spec_.depth = hidden.size();
  net.spec_.input_dim = hidden.front().fan_in();
  net.spec_.output_dim = readout.fan_out();
  net.encoder_u_ = std::move(encoder_u);
  net.encoder_v_ = std::move(encoder_v);
  net.hidden_ = std::move(hidden);
  net.readout_ = std::move(readout);
  return net;
}

ad::Var ModifiedMlp::apply(ad::Tape& tape, ad::Var x) const {
  const Activation act = spec_.activation;
  ad::Var u = encoder_u_.apply(tape, x, act);
  ad::Var v = encoder_v_.apply(tape, x, act);
  ad::Var h = hidden_.front().apply(tape, x, act);
  ad::Var v_minus_u;
  if (hidden_.size() > 1) {
    ad::Tape::Scope scope(tape, "gate");
    v_minus_u = tape.sub(v, u);
  }
  for (std::size_t l = 1; l < hidden_.size(); ++l) {
    ad::Var z = hidden_[l].apply(tape, h, act);
    ad::Tape::Scope scope(tape, hidden_[l].name() + "/gate");
    // (1 - z) u + z v == u + z (v - u)
    h = tape.add(u, tape.mul(z, v_minus_u));
  }
  return readout_.apply(tape, h, Activation::kLinear);
}

std::vector<const DenseLayer*> ModifiedMlp::layers() const {
  std::vector<const DenseLayer*> out{&encoder_u_, &encoder_v_};
  for (const auto& l : hidden_) out.push_back(&l);
  out.push_back(&readout_);
  return out;
}

Architecture parse_architecture(std::string_view name) {
  if (name == "mlp") return Architecture::kMlp;
  if (name == "modified_mlp" || name == "modified-mlp") return Architecture::kModifiedMlp;
  if (name == "deeponet") return Architecture::kDeepOnet;
  throw ArgumentError("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(Architecture a) noexcept {
  switch (a) {
    case Architecture::kMlp: return "mlp";
    case Architecture::kModifiedMlp: return "modified_mlp";
    case Architecture::kDeepOnet: return "deeponet";
  }
  return "?";
}

CoordinateNet CoordinateNet::create(ad::ParamSet& params, Rng& rng, const std::string& prefix, Embedding embedding,
                                    Architecture arch, MlpSpec spec) {
  CoordinateNet net;
  spec.input_dim = embedding.output_dim();
  net.embedding_ = std::move(embedding);
  net.arch_ = arch;
  switch (arch) {
    case Architecture::kMlp:
      net.mlp_ = Mlp::create(params, rng, prefix, spec);
      break;
    case Architecture::kModifiedMlp:
      net.modified_ = ModifiedMlp::create(params, rng, prefix, spec);
      break;
    case Architecture::kDeepOnet:
      throw ArgumentError("a coordinate network cannot be a DeepONet");
  }
  return net;
}

ad::Var CoordinateNet::apply(ad::Tape& tape, ad::Var x) const {
  ad::Var features = embedding_.apply(tape, x);
  return arch_ == Architecture::kMlp ? mlp_.apply(tape, features) : modified_.apply(tape, features);
}

std::vector<const DenseLayer*> CoordinateNet::layers() const {
  if (arch_ == Architecture::kModifiedMlp) return modified_.layers();
  std::vector<const DenseLayer*> out;
  for (const auto& l : mlp_.layers()) out.push_back(&l);
  return out;
}

DeepOnet DeepOnet::create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& branch,
                          const MlpSpec& trunk) {
  if (branch.output_dim != trunk.output_dim) {
    throw DimensionError("DeepONet branch width " + std::to_string(branch.output_dim) +
                         " does not match trunk width " + std::to_string(trunk.output_dim));
  }
  Mlp b = Mlp::create(params, rng, prefix + ".branch", branch);
  Mlp t = Mlp::create(params, rng, prefix + ".trunk", trunk);
  return from_parts(std::move(b), std::move(t));
}

DeepOnet DeepOnet::from_parts(Mlp branch, Mlp trunk) {
  if (branch.spec().output_dim != trunk.spec().output_dim) {
    throw DimensionError("DeepONet branch width " + std::to_string(branch.spec().output_dim) +
                         " does not match trunk width " + std::to_string(trunk.spec().output_dim));
  }
  DeepOnet net;
  net.branch_ = std::move(branch);
  net.trunk_ = std::move(trunk);
  return net;
}

ad::Var DeepOnet::apply(ad::Tape& tape, ad::Var sensors, ad::Var coords) const {
  ad::Var b = branch_.apply(tape, sensors);
  ad::Var t = trunk_.apply(tape, coords);
  ad::Tape::Scope scope(tape, "deeponet");
  return tape.row_sum(tape.mul(b, t));
}

ad::Var DeepOnet::apply_grid(ad::Tape& tape, ad::Var sensors, ad::Var coords) const {
  ad::Var b = branch_.apply(tape, sensors);
  ad::Var t = trunk_.apply(tape, coords);
  ad::Tape::Scope scope(tape, "deeponet");
  return tape.linear(b, t);
}

std::vector<const DenseLayer*> DeepOnet::layers() const {
  std::vector<const DenseLayer*> out;
  for (const auto& l : branch_.layers()) out.push_back(&l);
  for (const auto& l : trunk_.layers()) out.push_back(&l);
  return out;
}

std::vector<double> effective_weights(const std::vector<const DenseLayer*>& layers, const ad::ParamSet& params) {
  std::vector<double> out;
  for (const DenseLayer* layer : layers) {
    const Tensor w = layer->effective_weight(params);
    out.insert(out.end(), w.data().begin(), w.data().end());
  }
  return out;
}

}  // namespace rwf::nn
