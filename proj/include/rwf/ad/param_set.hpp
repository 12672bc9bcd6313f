#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rwf/core/tensor.hpp"

namespace rwf::ad {

struct ParamId {
  std::uint32_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named trainable tensors. Values are mutated in place by optimizers; tapes read
/// them on every forward pass.
class ParamSet {
 public:
  ParamId add(std::string name, Tensor value);

  std::size_t count() const noexcept { return values_.size(); }
  std::size_t total_size() const noexcept;

  const Tensor& operator[](ParamId id) const { return values_.at(id.index); }
  Tensor& operator[](ParamId id) { return values_.at(id.index); }
  const std::string& name(ParamId id) const { return names_.at(id.index); }
  std::optional<ParamId> find(const std::string& name) const;

  const std::vector<Tensor>& values() const noexcept { return values_; }
  std::vector<Tensor>& values() noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::vector<double> flatten() const;
  void assign_flat(const std::vector<double>& flat);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// One gradient tensor per registered parameter, same order and shapes.
struct ParamGradients {
  std::vector<Tensor> values;

  static ParamGradients zeros_like(const ParamSet& params);
  const Tensor& operator[](ParamId id) const { return values.at(id.index); }
  Tensor& operator[](ParamId id) { return values.at(id.index); }
  std::vector<double> flatten() const;
  bool all_finite() const noexcept;
};

}  // namespace rwf::ad
