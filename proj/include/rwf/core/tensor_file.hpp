#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rwf/core/tensor.hpp"

namespace rwf {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary container for named tensors.
///
/// Layout (little-endian):
///   magic[4] | u32 version | u64 count |
///   count x { u64 name_len | name bytes | u64 rank | u64 dims[rank] | f64 data[prod(dims)] }
///
/// Doubles are stored bit-for-bit, so a save/load round trip is exact.
inline constexpr std::uint32_t kTensorFileVersion = 1;
inline constexpr std::array<char, 4> kDatasetMagic{'R', 'W', 'F', 'D'};
inline constexpr std::array<char, 4> kCheckpointMagic{'R', 'W', 'F', 'C'};

void save_tensors(const std::filesystem::path& path, const std::array<char, 4>& magic,
                  const NamedTensors& tensors);

/// Throws std::runtime_error on a bad magic, unsupported version or truncated file.
NamedTensors load_tensors(const std::filesystem::path& path, const std::array<char, 4>& magic);

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

}  // namespace rwf
