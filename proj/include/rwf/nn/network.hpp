#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rwf/ad/param_set.hpp"
#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/nn/dense.hpp"
#include "rwf/nn/embedding.hpp"

namespace rwf::nn {

struct MlpSpec {
  std::size_t input_dim = 1;
  std::size_t width = 128;
  std::size_t depth = 3;  // hidden layers
  std::size_t output_dim = 1;
  Activation activation = Activation::kRelu;
  Parameterization parameterization = Parameterization::kPlain;
  FactorizationInit rwf;
};

/// depth hidden layers of `width` neurons followed by a linear readout.
class Mlp {
 public:
  static Mlp create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& spec);

  ad::Var apply(ad::Tape& tape, ad::Var x) const;

  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

 private:
  MlpSpec spec_;
  std::vector<DenseLayer> layers_;  // hidden..., readout
};

/// Two-encoder gated MLP:
///   U = act(W_u x + b_u), V = act(W_v x + b_v), H_1 = act(W_1 x + b_1)
///   Z_l = act(W_{l+1} H_l + b_{l+1}),  H_{l+1} = (1 - Z_l) * U + Z_l * V,  l < depth
///   y = W_out H_depth + b_out
class ModifiedMlp {
 public:
  static ModifiedMlp create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& spec);
  /// Assembles a network from existing layers; checks that all widths agree.
  static ModifiedMlp from_layers(const MlpSpec& spec, DenseLayer encoder_u, DenseLayer encoder_v,
                                 std::vector<DenseLayer> hidden, DenseLayer readout);

  ad::Var apply(ad::Tape& tape, ad::Var x) const;

  const MlpSpec& spec() const noexcept { return spec_; }
  const DenseLayer& encoder_u() const noexcept { return encoder_u_; }
  const DenseLayer& encoder_v() const noexcept { return encoder_v_; }
  const std::vector<DenseLayer>& hidden() const noexcept { return hidden_; }
  const DenseLayer& readout() const noexcept { return readout_; }
  /// Every layer in a fixed order: encoder_u, encoder_v, hidden..., readout.
  std::vector<const DenseLayer*> layers() const;

 private:
  MlpSpec spec_;
  DenseLayer encoder_u_;
  DenseLayer encoder_v_;
  std::vector<DenseLayer> hidden_;
  DenseLayer readout_;
};

enum class Architecture { kMlp, kModifiedMlp, kDeepOnet };
Architecture parse_architecture(std::string_view name);
std::string_view to_string(Architecture a) noexcept;

/// Embedding followed by an MLP or modified MLP; maps coordinates to field values.
class CoordinateNet {
 public:
  static CoordinateNet create(ad::ParamSet& params, Rng& rng, const std::string& prefix, Embedding embedding,
                              Architecture arch, MlpSpec spec);

  ad::Var apply(ad::Tape& tape, ad::Var x) const;

  const Embedding& embedding() const noexcept { return embedding_; }
  Architecture architecture() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return embedding_.input_dim(); }
  std::vector<const DenseLayer*> layers() const;

 private:
  Embedding embedding_;
  Architecture arch_ = Architecture::kMlp;
  Mlp mlp_;
  ModifiedMlp modified_;
};

/// G(a)(y) = sum_k branch_k(a) * trunk_k(y).
class DeepOnet {
 public:
  static DeepOnet create(ad::ParamSet& params, Rng& rng, const std::string& prefix, const MlpSpec& branch,
                         const MlpSpec& trunk);
  /// Throws DimensionError when the branch and trunk output widths differ.
  static DeepOnet from_parts(Mlp branch, Mlp trunk);

  /// Row-paired evaluation: row i of `sensors` with row i of `coords`, returns [B x 1].
  ad::Var apply(ad::Tape& tape, ad::Var sensors, ad::Var coords) const;
  /// Every function against every query point: [N x m] and [P x d] give [N x P].
  ad::Var apply_grid(ad::Tape& tape, ad::Var sensors, ad::Var coords) const;

  const Mlp& branch() const noexcept { return branch_; }
  const Mlp& trunk() const noexcept { return trunk_; }
  std::vector<const DenseLayer*> layers() const;

 private:
  Mlp branch_;
  Mlp trunk_;
};

/// Concatenated effective weights of the given layers (biases excluded).
std::vector<double> effective_weights(const std::vector<const DenseLayer*>& layers, const ad::ParamSet& params);

}  // namespace rwf::nn
