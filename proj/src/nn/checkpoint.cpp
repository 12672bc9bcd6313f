#include "rwf/nn/checkpoint.hpp"

#include <unordered_map>

#include "rwf/core/errors.hpp"

namespace rwf::nn {
namespace {
constexpr std::string_view kParamPrefix = "param/";
constexpr std::string_view kBufferPrefix = "buffer/";
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ad::ParamSet& params, const NamedTensors& buffers) {
  NamedTensors out;
  out.reserve(params.count() + buffers.size());
  for (std::size_t i = 0; i < params.count(); ++i) {
    out.emplace_back(std::string(kParamPrefix) + params.names()[i], params.values()[i]);
  }
  for (const auto& [name, t] : buffers) out.emplace_back(std::string(kBufferPrefix) + name, t);
  save_tensors(path, kCheckpointMagic, out);
}

NamedTensors load_checkpoint(const std::filesystem::path& path, ad::ParamSet& params) {
  NamedTensors stored = load_tensors(path, kCheckpointMagic);
  std::unordered_map<std::string, const Tensor*> by_name;
  NamedTensors buffers;
  for (const auto& [name, t] : stored) {
    if (name.starts_with(kParamPrefix)) {
      by_name.emplace(name.substr(kParamPrefix.size()), &t);
    } else if (name.starts_with(kBufferPrefix)) {
      buffers.emplace_back(name.substr(kBufferPrefix.size()), t);
    } else {
      throw std::runtime_error(path.string() + ": unexpected entry '" + name + "'");
    }
  }
  if (by_name.size() != params.count()) {
    throw DimensionError(path.string() + ": checkpoint has " + std::to_string(by_name.size()) +
                         " parameters, network has " + std::to_string(params.count()));
  }
  for (std::size_t i = 0; i < params.count(); ++i) {
    const std::string& name = params.names()[i];
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DimensionError(path.string() + ": missing parameter '" + name + "'");
    if (it->second->shape() != params.values()[i].shape()) {
      throw DimensionError(path.string() + ": parameter '" + name + "' has shape " +
                           shape_string(it->second->shape()) + ", expected " +
                           shape_string(params.values()[i].shape()));
    }
  }
  for (std::size_t i = 0; i < params.count(); ++i) params.values()[i] = *by_name.at(params.names()[i]);
  return buffers;
}

}  // namespace rwf::nn
