#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::tasks {

/// Row-major image, values in [0, 1], channels interleaved.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  static Image blank(std::size_t height, std::size_t width, std::size_t channels = 1);
  double& at(std::size_t r, std::size_t c, std::size_t ch = 0) { return pixels[(r * width + c) * channels + ch]; }
  double at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
    return pixels[(r * width + c) * channels + ch];
  }
  /// [height*width x channels].
  Tensor as_matrix() const;
  static Image from_matrix(const Tensor& m, std::size_t height, std::size_t width);
};

/// 8-bit binary PGM (P5, one channel) or PPM (P6, three channels).
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

/// Random 1/f sinusoid field plus soft-edged discs, channels correlated. Stands in for a
/// natural photograph when no image file is given.
Image procedural_image(Rng& rng, std::size_t height, std::size_t width, std::size_t channels = 1);

/// Keeps pixels at even row and column indices. Odd dimensions throw ArgumentError.
Image downsample_by_2(const Image& image);

/// Pixel (r, c) of an H x W image sits at (r / H, c / W) in [0, 1)^2; returns [H*W x 2].
/// A stride-2 subsample of the grid therefore lands on the same coordinates.
Tensor pixel_coordinates(std::size_t height, std::size_t width);

/// 10 log10(1 / MSE) with peak 1; +infinity when MSE is zero.
double psnr(std::span<const double> pred, std::span<const double> truth);
double psnr(const Image& pred, const Image& truth);

/// ||pred - truth|| / ||truth||. A zero truth throws ArgumentError.
double relative_l2(std::span<const double> pred, std::span<const double> truth);
double mse(std::span<const double> pred, std::span<const double> truth);

}  // namespace rwf::tasks
