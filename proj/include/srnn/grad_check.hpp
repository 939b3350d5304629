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

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "srnn/autodiff.hpp"

namespace srnn::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = true;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

/// Denominator floor: central differences of an O(1) loss carry roundoff
/// around 1e-12 at step 1e-5, so entries far below this are compared
/// absolutely rather than relatively.
inline constexpr double kRelativeErrorFloor = 1e-7;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(kRelativeErrorFloor, std::abs(analytic) + std::abs(numeric));
}

/// Builder signature: (Tape&, span of parameter Vars in the order given) -> scalar loss.
template <typename F>
concept LossBuilder = requires(F f, Tape& t, std::span<const Var> p) {
  { f(t, p) } -> std::convertible_to<Var>;
};

/// Compares reverse-mode gradients with central differences of step `step`.
/// The builder must be deterministic (no train-mode dropout).
template <LossBuilder F>
GradCheckReport grad_check(F&& build, std::vector<Matrix> params,
                           const std::vector<std::string>& names, double step, double tolerance) {
  auto evaluate = [&](std::vector<Matrix> const& values, std::vector<Matrix>* grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const Matrix& v : values) vars.push_back(tape.parameter(v));
    Var loss = build(tape, std::span<const Var>(vars));
    if (grads != nullptr) {
      tape.backward(loss);
      grads->clear();
      for (const Var& v : vars) grads->push_back(v.grad());
    }
    return loss.value()(0, 0);
  };

  std::vector<Matrix> analytic;
  evaluate(params, &analytic);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = p < names.size() ? names[p] : "param" + std::to_string(p);
    for (Index k = 0; k < params[p].size(); ++k) {
      const double original = params[p].data()[k];
      params[p].data()[k] = original + step;
      const double up = evaluate(params, nullptr);
      params[p].data()[k] = original - step;
      const double down = evaluate(params, nullptr);
      params[p].data()[k] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data()[k];
      const double err = relative_error(a, numeric);
      if (err > entry.max_rel_error || k == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, err);
        entry.worst_index = k;
        entry.worst_analytic = a;
        entry.worst_numeric = numeric;
      }
    }
    if (entry.max_rel_error > tolerance) report.passed = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace srnn::ad
