#include "rwf/ad/param_set.hpp"

#include <algorithm>

#include "rwf/core/errors.hpp"

namespace rwf::ad {

ParamId ParamSet::add(std::string name, Tensor value) {
  if (find(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return ParamId{static_cast<std::uint32_t>(values_.size() - 1)};
}

std::size_t ParamSet::total_size() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::optional<ParamId> ParamSet::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return ParamId{static_cast<std::uint32_t>(it - names_.begin())};
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& v : values_) flat.insert(flat.end(), v.data().begin(), v.data().end());
  return flat;
}

void ParamSet::assign_flat(const std::vector<double>& flat) {
  if (flat.size() != total_size()) {
    throw DimensionError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                         std::to_string(total_size()));
  }
  std::size_t offset = 0;
  for (auto& v : values_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.data().begin());
    offset += v.size();
  }
}

ParamGradients ParamGradients::zeros_like(const ParamSet& params) {
  ParamGradients g;
  g.values.reserve(params.count());
  for (const auto& v : params.values()) g.values.emplace_back(v.shape(), 0.0);
  return g;
}

std::vector<double> ParamGradients::flatten() const {
  std::vector<double> flat;
  for (const auto& v : values) flat.insert(flat.end(), v.data().begin(), v.data().end());
  return flat;
}

bool ParamGradients::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](const Tensor& t) { return t.all_finite(); });
}

}  // namespace rwf::ad
