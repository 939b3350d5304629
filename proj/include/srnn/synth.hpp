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

// Synthetic traffic with a known spatio-temporal structure:
//
//   x_u^t = clamp(mu(t) + s_u^t, 0, 2 * base)
//   mu(t) = base + amplitude * sin(2 pi (t mod P) / P),   P = steps per day
//   s^t   = rho * s^{t-1} + kappa * A_hat s^{t-1} + eps^t, eps ~ N(0, sigma^2),  s^0 = 0
//
// A_hat is the symmetrized adjacency with each row divided by its degree
// (rows of isolated nodes stay zero).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "srnn/dataset.hpp"
#include "srnn/errors.hpp"
#include "srnn/graph.hpp"
#include "srnn/matrix.hpp"
#include "srnn/text.hpp"

namespace srnn {

struct SynthConfig {
  RoadGraph graph;
  std::size_t days = 60;
  int step_minutes = kDefaultStepMinutes;
  double base = 50.0;       // km/h
  double amplitude = 20.0;  // km/h
  double rho = 0.6;         // temporal persistence
  double kappa = 0.3;       // spatial coupling
  double sigma = 3.0;       // noise std, km/h
  std::uint64_t seed = 0;
  std::string start = "2016-01-01T00:00";

  void validate() const {
    if (graph.node_count() == 0) throw ConfigError("synth: graph has no nodes");
    if (days < 1) throw ConfigError("synth: days must be >= 1");
    if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0) {
      throw ConfigError("synth: step must divide a day");
    }
    if (rho < 0.0 || kappa < 0.0 || !(rho + kappa < 1.0)) {
      throw ConfigError("synth: need rho, kappa >= 0 and rho + kappa < 1");
    }
    if (base - amplitude < 0.0 || amplitude < 0.0) throw ConfigError("synth: need 0 <= amplitude <= base");
    if (sigma < 0.0) throw ConfigError("synth: sigma must be >= 0");
    if (!text::parse_timestamp(start)) throw ConfigError("synth: bad start timestamp '" + start + "'");
  }

  /// True when both configs describe the same process family.
  bool same_process(const SynthConfig& o) const {
    return base == o.base && amplitude == o.amplitude && rho == o.rho && kappa == o.kappa &&
           sigma == o.sigma && step_minutes == o.step_minutes;
  }
};

/// Row-normalized symmetrized adjacency.
inline Matrix coupling_matrix(const RoadGraph& g) {
  const auto n = static_cast<Index>(g.node_count());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : g.spatial_edges()) {
    a(static_cast<Index>(e.from), static_cast<Index>(e.to)) = 1.0;
    a(static_cast<Index>(e.to), static_cast<Index>(e.from)) = 1.0;
  }
  for (Index r = 0; r < n; ++r) {
    const double degree = a.row(r).sum();
    if (degree > 0.0) a.row(r) /= degree;
  }
  return a;
}

inline double daily_profile(const SynthConfig& cfg, std::size_t t) {
  const std::size_t period = static_cast<std::size_t>(kMinutesPerDay / cfg.step_minutes);
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % period) / static_cast<double>(period);
  return cfg.base + cfg.amplitude * std::sin(phase);
}

inline SpeedDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.graph.node_count();
  const std::size_t steps = cfg.days * static_cast<std::size_t>(kMinutesPerDay / cfg.step_minutes);
  const Matrix coupling = coupling_matrix(cfg.graph);
  std::mt19937_64 rng(cfg.seed);

  SpeedDataset ds;
  ds.segment_ids = cfg.graph.segment_ids();
  ds.step_minutes = cfg.step_minutes;
  ds.values.resize(static_cast<Index>(steps), static_cast<Index>(n));
  ds.missing.assign(steps * n, 0);
  const std::int64_t start = *text::parse_timestamp(cfg.start);

  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Index>(n));
  for (std::size_t t = 0; t < steps; ++t) {
    ds.timestamps.push_back(start + static_cast<std::int64_t>(t) * cfg.step_minutes);
    if (t > 0) {
      Eigen::VectorXd next = cfg.rho * s + cfg.kappa * (coupling * s);
      if (cfg.sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.sigma);
        for (Index u = 0; u < next.size(); ++u) next(u) += noise(rng);
      }
      s = std::move(next);
    }
    const double mu = daily_profile(cfg, t);
    for (std::size_t u = 0; u < n; ++u) {
      ds.values(static_cast<Index>(t), static_cast<Index>(u)) =
          std::clamp(mu + s(static_cast<Index>(u)), 0.0, 2.0 * cfg.base);
    }
  }
  return ds;
}

inline std::pair<SpeedDataset, SpeedDataset> generate_pair(const SynthConfig& a, const SynthConfig& b) {
  if (!a.same_process(b)) {
    throw ConfigError("synth: paired configs must share base, amplitude, rho, kappa, sigma and step");
  }
  return {generate(a), generate(b)};
}

}  // namespace srnn
