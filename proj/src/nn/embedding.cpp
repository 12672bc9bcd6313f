#include "rwf/nn/embedding.hpp"

#include <cmath>
#include <numbers>

#include "rwf/core/errors.hpp"

namespace rwf::nn {

Embedding::Kind parse_embedding_kind(std::string_view name) {
  if (name == "identity" || name == "none") return Embedding::Kind::kIdentity;
  if (name == "positional") return Embedding::Kind::kPositional;
  if (name == "gaussian") return Embedding::Kind::kGaussian;
  if (name == "periodic") return Embedding::Kind::kPeriodicAdvection;
  throw ArgumentError("unknown embedding '" + std::string(name) + "'");
}

std::string_view to_string(Embedding::Kind kind) noexcept {
  switch (kind) {
    case Embedding::Kind::kIdentity: return "identity";
    case Embedding::Kind::kPositional: return "positional";
    case Embedding::Kind::kGaussian: return "gaussian";
    case Embedding::Kind::kPeriodicAdvection: return "periodic";
  }
  return "?";
}

Embedding Embedding::identity(std::size_t input_dim) {
  if (input_dim == 0) throw ArgumentError("embedding input dimension must be positive");
  Embedding e;
  e.input_dim_ = input_dim;
  return e;
}

Embedding Embedding::positional(std::size_t input_dim, std::size_t features, double scale) {
  if (input_dim == 0 || features == 0) throw ArgumentError("positional encoding needs positive sizes");
  if (!(scale > 0.0)) throw ArgumentError("positional encoding scale must be positive");
  Tensor f = Tensor::matrix(features * input_dim, input_dim);
  for (std::size_t j = 0; j < features; ++j) {
    const double freq = std::pow(scale, static_cast<double>(j) / static_cast<double>(features));
    for (std::size_t i = 0; i < input_dim; ++i) f(j * input_dim + i, i) = freq;
  }
  return from_frequencies(Kind::kPositional, std::move(f));
}

Embedding Embedding::gaussian(Rng& rng, std::size_t input_dim, std::size_t features, double scale) {
  if (input_dim == 0 || features == 0) throw ArgumentError("gaussian features need positive sizes");
  if (!(scale > 0.0)) throw ArgumentError("gaussian feature scale must be positive");
  Tensor b = Tensor::matrix(features, input_dim);
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : b.data()) v = dist(rng);
  return from_frequencies(Kind::kGaussian, std::move(b));
}

Embedding Embedding::periodic_advection() {
  Embedding e;
  e.kind_ = Kind::kPeriodicAdvection;
  e.input_dim_ = 2;
  return e;
}

Embedding Embedding::from_frequencies(Kind kind, Tensor frequencies) {
  if (kind != Kind::kPositional && kind != Kind::kGaussian) {
    throw ArgumentError("from_frequencies needs a Fourier embedding kind");
  }
  if (frequencies.rank() != 2) throw DimensionError("frequency matrix must be rank 2");
  Embedding e;
  e.kind_ = kind;
  e.input_dim_ = frequencies.cols();
  e.frequencies_ = std::move(frequencies);
  return e;
}

std::size_t Embedding::output_dim() const noexcept {
  switch (kind_) {
    case Kind::kIdentity: return input_dim_;
    case Kind::kPositional:
    case Kind::kGaussian: return 2 * frequencies_.rows();
    case Kind::kPeriodicAdvection: return 3;
  }
  return 0;
}

ad::Var Embedding::apply(ad::Tape& tape, ad::Var x) const {
  ad::Tape::Scope scope(tape, "embedding");
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kPositional:
    case Kind::kGaussian: {
      ad::Var phase = tape.scale(tape.linear(x, tape.constant(frequencies_)), 2.0 * std::numbers::pi);
      return tape.concat({tape.cos(phase), tape.sin(phase)});
    }
    case Kind::kPeriodicAdvection: {
      ad::Var xs = tape.linear(x, tape.constant(Tensor::matrix(1, 2, {1.0, 0.0})));
      ad::Var ts = tape.linear(x, tape.constant(Tensor::matrix(1, 2, {0.0, 1.0})));
      return tape.concat({tape.cos(xs), tape.sin(xs), ts});
    }
  }
  return x;
}

}  // namespace rwf::nn
