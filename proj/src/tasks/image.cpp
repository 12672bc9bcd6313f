#include "rwf/tasks/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "rwf/core/errors.hpp"

namespace rwf::tasks {
namespace {

void check_same(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": sizes " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
}

// Skips whitespace and '#' comments in a PNM header.
void skip_header_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_int(std::istream& in, const std::filesystem::path& path) {
  skip_header_space(in);
  long long v = -1;
  if (!(in >> v) || v <= 0) throw std::runtime_error(path.string() + ": malformed PNM header");
  return static_cast<std::size_t>(v);
}

}  // namespace

Image Image::blank(std::size_t height, std::size_t width, std::size_t channels) {
  if (height == 0 || width == 0 || channels == 0) throw ArgumentError("image dimensions must be positive");
  return Image{height, width, channels, std::vector<double>(height * width * channels, 0.0)};
}

Tensor Image::as_matrix() const { return Tensor(Shape{height * width, channels}, pixels); }

Image Image::from_matrix(const Tensor& m, std::size_t height, std::size_t width) {
  if (m.rank() != 2 || m.rows() != height * width) {
    throw DimensionError("image from " + shape_string(m.shape()) + " does not fit " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  return Image{height, width, m.cols(), std::vector<double>(m.data().begin(), m.data().end())};
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open image");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw std::runtime_error(path.string() + ": not a binary PGM/PPM file");
  }
  const std::size_t width = read_header_int(in, path);
  const std::size_t height = read_header_int(in, path);
  const std::size_t maxval = read_header_int(in, path);
  if (maxval > 255) throw std::runtime_error(path.string() + ": only 8-bit images are supported");
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raw(width * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error(path.string() + ": truncated raster");
  }
  Image img = Image::blank(height, width, channels);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / static_cast<double>(maxval);
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ArgumentError("PNM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write image");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Image procedural_image(Rng& rng, std::size_t height, std::size_t width, std::size_t channels) {
  Image img = Image::blank(height, width, channels);
  constexpr int kWaves = 48;
  constexpr int kDiscs = 6;
  constexpr double kMaxFreq = 14.0;  // cycles per unit: below the training-grid Nyquist at 32 x 32
  struct Wave {
    double fx, fy, phase, amp;
    std::vector<double> tint;
  };
  std::vector<Wave> waves;
  double power = 0.0;
  for (int k = 0; k < kWaves; ++k) {
    // Log-uniform radial frequency with 1/f amplitude, roughly natural-image statistics.
    const double f = std::exp(uniform(rng, 0.0, std::log(kMaxFreq)));
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    Wave w{f * std::cos(angle), f * std::sin(angle), uniform(rng, 0.0, 2 * std::numbers::pi), 1.0 / f, {}};
    for (std::size_t ch = 0; ch < channels; ++ch) w.tint.push_back(uniform(rng, 0.6, 1.4));
    power += 0.5 * w.amp * w.amp;
    waves.push_back(std::move(w));
  }
  const double norm = 0.15 / std::sqrt(power);
  struct Disc {
    double y, x, radius;
    std::vector<double> value;
  };
  std::vector<Disc> discs;
  for (int k = 0; k < kDiscs; ++k) {
    Disc d{uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.06, 0.2), {}};
    const double base = uniform(rng, -0.25, 0.25);
    for (std::size_t ch = 0; ch < channels; ++ch) d.value.push_back(base + uniform(rng, -0.08, 0.08));
    discs.push_back(std::move(d));
  }
  const double edge = 1.0 / static_cast<double>(std::max(height, width));
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double y = static_cast<double>(r) / static_cast<double>(height);
      const double x = static_cast<double>(c) / static_cast<double>(width);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double v = 0.5;
        for (const auto& w : waves) {
          v += norm * w.amp * w.tint[ch] * std::sin(2 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
        }
        for (const auto& d : discs) {
          // Edge ramp about one pixel wide.
          const double dist = std::hypot(y - d.y, x - d.x) - d.radius;
          v += d.value[ch] * std::clamp(0.5 - dist / (2 * edge), 0.0, 1.0);
        }
        img.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

Image downsample_by_2(const Image& image) {
  if (image.height % 2 != 0 || image.width % 2 != 0) {
    throw ArgumentError("downsample_by_2 needs even dimensions, got " + std::to_string(image.height) + "x" +
                        std::to_string(image.width));
  }
  Image out = Image::blank(image.height / 2, image.width / 2, image.channels);
  for (std::size_t r = 0; r < out.height; ++r) {
    for (std::size_t c = 0; c < out.width; ++c) {
      for (std::size_t ch = 0; ch < image.channels; ++ch) out.at(r, c, ch) = image.at(2 * r, 2 * c, ch);
    }
  }
  return out;
}

Tensor pixel_coordinates(std::size_t height, std::size_t width) {
  Tensor xy = Tensor::matrix(height * width, 2);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      xy(r * width + c, 0) = static_cast<double>(r) / static_cast<double>(height);
      xy(r * width + c, 1) = static_cast<double>(c) / static_cast<double>(width);
    }
  }
  return xy;
}

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_same(pred, truth, "mse");
  if (pred.empty()) throw ArgumentError("mse of empty arrays");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double psnr(std::span<const double> pred, std::span<const double> truth) {
  const double e = mse(pred, truth);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(e);
}

double psnr(const Image& pred, const Image& truth) {
  if (pred.height != truth.height || pred.width != truth.width || pred.channels != truth.channels) {
    throw DimensionError("psnr of images with different shapes");
  }
  return psnr(pred.pixels, truth.pixels);
}

double relative_l2(std::span<const double> pred, std::span<const double> truth) {
  check_same(pred, truth, "relative_l2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw ArgumentError("relative_l2 with an all-zero reference");
  return std::sqrt(num / den);
}

}  // namespace rwf::tasks
