// Copyright 2026 The srnn-traffic Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <string>

#include "srnn/errors.hpp"

namespace srnn {

/// Dense 64-bit matrix, row-major so that data() matches the on-disk layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

inline std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

inline Matrix make_matrix(Index rows, Index cols, std::initializer_list<double> values) {
  if (static_cast<Index>(values.size()) != rows * cols) {
    throw DimensionError("make_matrix: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(rows, cols));
  }
  Matrix m(rows, cols);
  Index k = 0;
  for (double v : values) {
    m.data()[k++] = v;
  }
  return m;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace srnn
