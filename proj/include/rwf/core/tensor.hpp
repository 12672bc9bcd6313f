#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rwf {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 (scalar), 1 (vector) and 2 (matrix)
/// are the only ranks the library produces.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  /// Rows of a matrix; a vector or scalar counts as one row.
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  /// Columns of a matrix; the length of a vector; 1 for a scalar.
  std::size_t cols() const noexcept {
    return shape_.size() == 2 ? shape_[1] : (shape_.size() == 1 ? shape_[0] : 1);
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const double* ptr() const noexcept { return data_.data(); }
  double* ptr() noexcept { return data_.data(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }

  double item() const;

  /// Reallocates only when the element count changes; contents are unspecified afterwards.
  void reshape_for_write(const Shape& shape);
  void fill(double value);

  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Largest elementwise |a - b|; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace rwf
