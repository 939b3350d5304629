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

// Test-only helpers. The finite-difference oracle here deliberately does not
// use srnn::ad::grad_check; it only needs a function returning a loss value.

#include <cmath>
#include <functional>
#include <random>

#include "srnn/matrix.hpp"

namespace srnn::testing {

/// Central differences of f with respect to every entry of x.
inline Matrix central_difference(const std::function<double(const Matrix&)>& f, Matrix x,
                                 double step = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index k = 0; k < x.size(); ++k) {
    const double orig = x.data()[k];
    x.data()[k] = orig + step;
    const double up = f(x);
    x.data()[k] = orig - step;
    const double down = f(x);
    x.data()[k] = orig;
    g.data()[k] = (up - down) / (2.0 * step);
  }
  return g;
}

inline double max_relative_error(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    const double d = std::abs(a.data()[k] - b.data()[k]);
    m = std::max(m, d / std::max(1e-8, std::abs(a.data()[k]) + std::abs(b.data()[k])));
  }
  return m;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = d(rng);
  return m;
}

/// Random values bounded away from zero by `gap` (for ReLU probes).
inline Matrix random_away_from_zero(Index rows, Index cols, std::mt19937_64& rng, double gap) {
  std::uniform_real_distribution<double> d(gap, 1.0 + gap);
  std::bernoulli_distribution sign(0.5);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = sign(rng) ? d(rng) : -d(rng);
  return m;
}

}  // namespace srnn::testing
