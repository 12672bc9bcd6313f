#include "rwf/core/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace rwf {
namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("truncated tensor file " + path.string());
  }
  return value;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const std::array<char, 4>& magic,
                  const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(magic.data(), magic.size());
  write_pod(out, kTensorFileVersion);
  write_pod(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_pod(out, static_cast<std::uint64_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.ptr()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path, const std::array<char, 4>& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> found{};
  if (!in.read(found.data(), found.size()) || found != magic) {
    throw std::runtime_error("bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kTensorFileVersion) {
    throw std::runtime_error("unsupported tensor file version " + std::to_string(version) + " in " +
                             path.string());
  }
  const auto count = read_pod<std::uint64_t>(in, path);
  NamedTensors tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint64_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw std::runtime_error("truncated tensor file " + path.string());
    }
    const auto rank = read_pod<std::uint64_t>(in, path);
    if (rank > 8) throw std::runtime_error("implausible rank in " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(in, path);
    std::vector<double> data(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw std::runtime_error("truncated tensor file " + path.string());
    }
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return tensors;
}

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::out_of_range("no tensor named '" + name + "'");
}

}  // namespace rwf
