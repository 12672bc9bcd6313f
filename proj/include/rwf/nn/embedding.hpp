#pragma once

#include <string_view>

#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::nn {

/// Fixed (non-trainable) input feature map.
///
///   identity            x
///   positional(m, s)    [cos(2 pi F x), sin(2 pi F x)], F rows = s^(j/m) e_i, j < m, i < d
///   gaussian(m, s)      [cos(2 pi B x), sin(2 pi B x)], B (m x d) ~ N(0, s^2)
///   periodic_advection  (x, t) -> [cos x, sin x, t]
class Embedding {
 public:
  enum class Kind { kIdentity, kPositional, kGaussian, kPeriodicAdvection };

  static Embedding identity(std::size_t input_dim);
  static Embedding positional(std::size_t input_dim, std::size_t features, double scale);
  static Embedding gaussian(Rng& rng, std::size_t input_dim, std::size_t features, double scale);
  static Embedding periodic_advection();
  /// Rebuilds a Fourier embedding from a stored frequency matrix (checkpoint restore).
  static Embedding from_frequencies(Kind kind, Tensor frequencies);

  ad::Var apply(ad::Tape& tape, ad::Var x) const;

  Kind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept;
  /// Frequency matrix (rows x input_dim) of the Fourier kinds; empty otherwise.
  const Tensor& frequencies() const noexcept { return frequencies_; }

 private:
  Kind kind_ = Kind::kIdentity;
  std::size_t input_dim_ = 0;
  Tensor frequencies_;
};

Embedding::Kind parse_embedding_kind(std::string_view name);
std::string_view to_string(Embedding::Kind kind) noexcept;

}  // namespace rwf::nn
