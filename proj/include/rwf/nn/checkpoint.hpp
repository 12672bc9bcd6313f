#pragma once

#include <filesystem>

#include "rwf/ad/param_set.hpp"
#include "rwf/core/tensor_file.hpp"

namespace rwf::nn {

/// Writes every parameter as "param/<name>" and every buffer (fixed, non-trainable
/// tensors such as Fourier frequencies) as "buffer/<name>". Round trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ad::ParamSet& params, const NamedTensors& buffers = {});

/// Overwrites the values of `params` from a checkpoint written for the same architecture
/// and returns its buffers. Missing parameters or shape changes throw DimensionError.
NamedTensors load_checkpoint(const std::filesystem::path& path, ad::ParamSet& params);

}  // namespace rwf::nn
