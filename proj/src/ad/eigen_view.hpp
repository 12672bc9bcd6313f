#pragma once

#include <Eigen/Core>

#include "rwf/core/tensor.hpp"

namespace rwf::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

// Vectors are viewed as a single row, scalars as 1x1.
inline ConstMatrixView view(const Tensor& t) {
  return ConstMatrixView(t.ptr(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline MatrixView view(Tensor& t) {
  return MatrixView(t.ptr(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace rwf::detail
