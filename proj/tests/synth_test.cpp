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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "srnn/evaluation.hpp"
#include "srnn/synth.hpp"

namespace srnn {
namespace {

SynthConfig config(std::size_t nodes, std::size_t days, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.graph = ring_with_chord(nodes);
  cfg.days = days;
  cfg.seed = seed;
  return cfg;
}

double correlation(const Matrix& r, Index a, Index b) {
  const Eigen::VectorXd x = r.col(a).array() - r.col(a).mean();
  const Eigen::VectorXd y = r.col(b).array() - r.col(b).mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

Matrix residuals(const SynthConfig& cfg, const SpeedDataset& ds) {
  Matrix r = ds.values;
  for (Index t = 0; t < r.rows(); ++t) r.row(t).array() -= daily_profile(cfg, static_cast<std::size_t>(t));
  return r;
}

// Mean lag-0 residual correlation over adjacent and over non-adjacent pairs.
std::pair<double, double> adjacency_correlations(const SynthConfig& cfg, const SpeedDataset& ds) {
  const Matrix r = residuals(cfg, ds);
  const Matrix a = coupling_matrix(cfg.graph);
  double adj = 0, non = 0;
  int n_adj = 0, n_non = 0;
  for (Index u = 0; u < r.cols(); ++u)
    for (Index v = u + 1; v < r.cols(); ++v) {
      const double c = correlation(r, u, v);
      if (a(u, v) > 0) {
        adj += c;
        ++n_adj;
      } else {
        non += c;
        ++n_non;
      }
    }
  return {adj / n_adj, non / n_non};
}

TEST(Generate, PureSinusoidWithoutResidual) {
  SynthConfig cfg = config(4, 2, 1);
  cfg.sigma = cfg.kappa = cfg.rho = 0.0;
  const auto ds = generate(cfg);
  EXPECT_EQ(ds.steps(), 192u);
  for (std::size_t t = 0; t < ds.steps(); ++t)
    for (Index u = 0; u < 4; ++u) EXPECT_EQ(ds.values(static_cast<Index>(t), u), daily_profile(cfg, t));
  EXPECT_EQ(ds.values(24, 0), 70.0);
  EXPECT_EQ(ds.values(0, 0), 50.0);
}

TEST(Generate, ExactlyPeriodicWhenNoiseless) {
  SynthConfig cfg = config(5, 3, 2);
  cfg.sigma = 0.0;
  const auto ds = generate(cfg);
  for (Index t = 96; t < ds.values.rows(); ++t) EXPECT_EQ(ds.values.row(t), ds.values.row(t - 96));
}

TEST(Generate, DeterministicAndBounded) {
  const SynthConfig cfg = config(6, 5, 3);
  const auto a = generate(cfg);
  EXPECT_EQ(a, generate(cfg));
  EXPECT_GE(a.values.minCoeff(), 0.0);
  EXPECT_LE(a.values.maxCoeff(), 100.0);
  SynthConfig other = cfg;
  other.seed = 4;
  EXPECT_FALSE(a == generate(other));
}

TEST(Generate, AdjacentResidualsMoreCorrelated) {
  const SynthConfig cfg = config(6, 30, 5);
  const auto [adjacent, non_adjacent] = adjacency_correlations(cfg, generate(cfg));
  EXPECT_GT(adjacent, non_adjacent);
}

TEST(Generate, InvalidConfig) {
  SynthConfig cfg = config(3, 1, 0);
  cfg.rho = 0.7;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = config(3, 1, 0);
  cfg.amplitude = 60;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = config(3, 0, 0);
  EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(GeneratePair, SharedProcessDifferentTopologies) {
  SynthConfig a = config(5, 30, 6), b = config(9, 30, 7);
  auto [da, db] = generate_pair(a, b);
  EXPECT_EQ(da.segments(), 5u);
  EXPECT_EQ(db.segments(), 9u);
  for (const auto& [cfg, ds] : {std::pair{a, da}, std::pair{b, db}}) {
    const auto [adjacent, non_adjacent] = adjacency_correlations(cfg, ds);
    EXPECT_GT(adjacent, non_adjacent);
  }
  auto [same1, same2] = generate_pair(a, a);
  EXPECT_EQ(same1, same2);
  b.kappa = 0.2;
  EXPECT_THROW(generate_pair(a, b), ConfigError);
}

TEST(Generate, PersistenceGapIsPositive) {
  const SynthConfig cfg = config(6, 4, 8);
  const auto p = prepare(cfg.graph, generate(cfg));
  EXPECT_GT(evaluate_baseline(BaselineKind::kPersistence, p).rmse_kmh, 0.0);
}

TEST(Generate, CsvMatchesLoader) {
  const SynthConfig cfg = config(3, 1, 9);
  const auto ds = generate(cfg);
  std::stringstream csv;
  write_speeds_csv(csv, ds);
  EXPECT_EQ(parse_speeds_csv(csv), ds);
}

}  // namespace
}  // namespace srnn
