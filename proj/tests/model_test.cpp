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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "srnn/grad_check.hpp"
#include "srnn/model.hpp"
#include "srnn/training.hpp"
#include "support.hpp"

namespace srnn {
namespace {

using ad::Tape;
using ad::Var;
using testing::central_difference;
using testing::max_relative_error;
using testing::random_matrix;

Hyperparams tiny(double dropout = 0.0) {
  Hyperparams hp;
  hp.node_hidden = hp.spatial_hidden = hp.temporal_hidden = 8;
  hp.embed = 4;
  hp.dropout = dropout;
  return hp;
}

RoadGraph three_node_two_edge() { return RoadGraph::build({"a", "b", "c"}, {{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}); }

TEST(InitParams, DeterministicAndBounded) {
  const Hyperparams hp = tiny();
  EXPECT_EQ(init_params(hp, 42), init_params(hp, 42));
  EXPECT_FALSE(init_params(hp, 42) == init_params(hp, 43));
  const SrnnParams p = init_params(hp, 1);
  // spatial_embed weight has fan_in 2; context_embed has fan_in 16 (bound 0.25).
  EXPECT_LE(p.spatial_embed.weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(2.0));
  EXPECT_LE(p.context_embed.weight.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_EQ(p.output.bias, Matrix::Zero(1, 1));
  for (const LstmParams* l : {&p.spatial_lstm, &p.temporal_lstm, &p.node_lstm}) {
    const Index h = l->hidden();
    EXPECT_TRUE((l->bias.middleCols(h, h).array() == 1.0).all());
    EXPECT_TRUE((l->bias.leftCols(h).array() == 0.0).all());
    EXPECT_TRUE((l->bias.rightCols(2 * h).array() == 0.0).all());
  }
}

TEST(InitParams, FanInFourBound) {
  Hyperparams hp = tiny();
  hp.embed = 2;
  hp.temporal_hidden = 1;
  hp.spatial_hidden = 3;  // context_embed fan_in = 1 + 3 = 4
  const SrnnParams p = init_params(hp, 7);
  EXPECT_EQ(p.context_embed.weight.rows(), 4);
  EXPECT_LE(p.context_embed.weight.cwiseAbs().maxCoeff(), 0.5);
}

TEST(ParamCount, ClosedFormMatchesEnumeration) {
  EXPECT_EQ(param_count(tiny()), 1485u);
  EXPECT_EQ(SrnnParams::zeros(tiny()).scalar_count(), 1485u);
  const Hyperparams table_one;
  EXPECT_EQ(param_count(table_one), 87137u);
  EXPECT_EQ(init_params(table_one, 0).scalar_count(), 87137u);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    Hyperparams hp;
    hp.node_hidden = size(rng);
    hp.spatial_hidden = size(rng);
    hp.temporal_hidden = size(rng);
    hp.embed = size(rng);
    EXPECT_EQ(param_count(hp), SrnnParams::zeros(hp).scalar_count());
  }
}

TEST(Embed, ZeroWeightsGiveZeros) {
  std::mt19937_64 rng(1);
  Tape t;
  BoundLinear w{t.parameter(Matrix::Zero(2, 4)), t.parameter(Matrix::Zero(1, 4))};
  Var x = t.constant(random_matrix(5, 2, rng));
  EXPECT_EQ(embed(x, w, 0.5, ad::Mode::kTrain, rng).value(), Matrix::Zero(5, 4));
  EXPECT_THROW(embed(t.constant(Matrix::Zero(5, 3)), w, 0.0, ad::Mode::kEval, rng), DimensionError);
}

TEST(Embed, EvalIndependentOfRng) {
  std::mt19937_64 rng(2);
  const Matrix x0 = random_matrix(5, 2, rng);
  const Matrix w0 = random_matrix(2, 4, rng);
  const Matrix b0 = random_matrix(1, 4, rng);
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 r(seed);
    Tape t;
    BoundLinear w{t.parameter(w0), t.parameter(b0)};
    return embed(t.constant(x0), w, 0.5, ad::Mode::kEval, r).value();
  };
  EXPECT_EQ(run(1), run(999));
}

TEST(Embed, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Matrix x0 = random_matrix(6, 2, rng);
  const Matrix w0 = random_matrix(2, 3, rng);
  const Matrix b0 = random_matrix(1, 3, rng);
  const Matrix pre = (x0 * w0).rowwise() + b0.row(0);
  ASSERT_GT(pre.cwiseAbs().minCoeff(), 1e-3);  // away from the ReLU kink
  const Matrix probe = random_matrix(6, 3, rng);
  auto value = [&](const Matrix& w, const Matrix& b) {
    return ((x0 * w).rowwise() + b.row(0)).cwiseMax(0.0).cwiseProduct(probe).sum();
  };
  Tape t;
  BoundLinear w{t.parameter(w0), t.parameter(b0)};
  t.backward(ad::sum_all(ad::mul(embed(t.constant(x0), w, 0.0, ad::Mode::kEval, rng), t.constant(probe))));
  EXPECT_LT(max_relative_error(w.weight.grad(), central_difference([&](const Matrix& m) { return value(m, b0); }, w0)), 1e-6);
  EXPECT_LT(max_relative_error(w.bias.grad(), central_difference([&](const Matrix& m) { return value(w0, m); }, b0)), 1e-6);
}

TEST(LstmCell, ZeroWeightsGiveZeroState) {
  Tape t;
  BoundLstm w{t.parameter(Matrix::Zero(3 + 2, 8)), t.parameter(Matrix::Zero(1, 8))};
  std::mt19937_64 rng(4);
  auto s = lstm_cell(t.constant(random_matrix(4, 3, rng)), t.constant(Matrix::Zero(4, 2)),
                     t.constant(Matrix::Zero(4, 2)), w);
  EXPECT_EQ(s.h.value(), Matrix::Zero(4, 2));
  EXPECT_EQ(s.c.value(), Matrix::Zero(4, 2));
  EXPECT_THROW(lstm_cell(t.constant(Matrix::Zero(3, 3)), t.constant(Matrix::Zero(4, 2)),
                         t.constant(Matrix::Zero(4, 2)), w),
               DimensionError);
}

TEST(LstmCell, HiddenBoundedAndGradientChecks) {
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(3, 4, rng, -3, 3);
  const Matrix h = random_matrix(3, 5, rng);
  const Matrix c = random_matrix(3, 5, rng, -2, 2);
  const Matrix probe = random_matrix(3, 5, rng);
  auto report = ad::grad_check(
      [&](Tape& t, std::span<const Var> p) {
        BoundLstm w{p[0], p[1]};
        auto s = lstm_cell(p[2], p[3], p[4], w);
        EXPECT_TRUE((s.h.value().array().abs() < 1.0).all());
        return ad::sum_all(ad::add(ad::mul(s.h, t.constant(probe)), ad::mul(s.c, s.c)));
      },
      {random_matrix(9, 20, rng), random_matrix(1, 20, rng), x, h, c}, {"weight", "bias", "x", "h", "c"},
      1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_rel_error();
}

TEST(ForwardStep, SingleIsolatedNodeZeroParams) {
  const Hyperparams hp = tiny();
  auto g = RoadGraph::build({"only"}, {{0}});
  Tape t;
  auto w = BoundParams::bind(t, SrnnParams::zeros(hp));
  std::mt19937_64 rng(0);
  auto r = forward_step(g, t.constant(make_matrix(1, 1, {0.4})), t.constant(make_matrix(1, 1, {0.3})),
                        zero_state(t, g, hp), w, hp, ad::Mode::kEval, rng);
  EXPECT_EQ(r.y.value(), Matrix::Zero(1, 1));
  EXPECT_EQ(r.state.h_spatial.rows(), 0);
}

TEST(ForwardStep, ShapesFollowGraph) {
  const Hyperparams hp = tiny(0.5);
  const SrnnParams params = init_params(hp, 3);
  std::mt19937_64 rng(6);
  for (std::size_t n : {1u, 2u, 5u, 9u}) {
    auto g = ring_with_chord(n);
    Tape t;
    auto w = BoundParams::bind(t, params);
    auto r = forward_step(g, t.constant(random_matrix(static_cast<Index>(n), 1, rng, 0, 1)),
                          t.constant(random_matrix(static_cast<Index>(n), 1, rng, 0, 1)), zero_state(t, g, hp), w,
                          hp, ad::Mode::kTrain, rng);
    EXPECT_EQ(r.y.rows(), static_cast<Index>(n));
    EXPECT_EQ(r.y.cols(), 1);
    EXPECT_EQ(r.cache.context.cols(), static_cast<Index>(hp.temporal_hidden + hp.spatial_hidden));
    EXPECT_EQ(r.state.h_spatial.rows(), static_cast<Index>(g.spatial_edge_count()));
  }
}

TEST(ForwardStep, ContextRowsAreTemporalThenSummedSpatial) {
  const Hyperparams hp = tiny();
  const SrnnParams params = init_params(hp, 4);
  auto g = ring_with_chord(5);
  std::mt19937_64 rng(7);
  Tape t;
  auto w = BoundParams::bind(t, params);
  auto r = forward_step(g, t.constant(random_matrix(5, 1, rng, 0, 1)), t.constant(random_matrix(5, 1, rng, 0, 1)),
                        zero_state(t, g, hp), w, hp, ad::Mode::kEval, rng);
  const Matrix& H = r.cache.context.value();
  const Matrix& hs = r.state.h_spatial.value();
  const Matrix& ht = r.state.h_temporal.value();
  for (std::size_t u = 0; u < 5; ++u) {
    Matrix expected = Matrix::Zero(1, 8);
    for (std::size_t e : g.incidence()[u]) expected += hs.row(static_cast<Index>(e));
    EXPECT_EQ(H.row(static_cast<Index>(u)).leftCols(8), ht.row(static_cast<Index>(u)));
    EXPECT_EQ(H.row(static_cast<Index>(u)).rightCols(8), expected);
  }
}

TEST(ForwardStep, BindingErrors) {
  const Hyperparams hp = tiny();
  auto g = ring_with_chord(4);
  Tape t;
  auto w = BoundParams::bind(t, SrnnParams::zeros(hp));
  std::mt19937_64 rng(0);
  auto other = ring_with_chord(5);
  EXPECT_THROW(forward_step(g, t.constant(Matrix::Zero(5, 1)), t.constant(Matrix::Zero(5, 1)),
                            zero_state(t, g, hp), w, hp, ad::Mode::kEval, rng),
               BindingError);
  EXPECT_THROW(forward_step(g, t.constant(Matrix::Zero(4, 1)), t.constant(Matrix::Zero(4, 1)),
                            zero_state(t, other, hp), w, hp, ad::Mode::kEval, rng),
               BindingError);
}

TEST(AggregateSpatial, PermutedIncidenceIsBitwiseIdentical) {
  std::mt19937_64 rng(8);
  auto g = graph_union({ring_with_chord(6, "a"), ring_with_chord(4, "b")});
  Tape t;
  Var hs = t.constant(random_matrix(static_cast<Index>(g.spatial_edge_count()), 7, rng, -1, 1));
  const Matrix canonical = aggregate_spatial(hs, g.incidence()).value();
  for (int trial = 0; trial < 25; ++trial) {
    IncidenceMap permuted = g.incidence();
    for (auto& list : permuted) std::shuffle(list.begin(), list.end(), rng);
    EXPECT_EQ(aggregate_spatial(hs, permuted).value(), canonical);
  }
}

TEST(ForwardWindow, SingleStepEqualsForwardStep) {
  const Hyperparams hp = tiny();
  const SrnnParams params = init_params(hp, 9);
  auto g = three_node_two_edge();
  std::mt19937_64 rng(9);
  const Matrix inputs = random_matrix(2, 3, rng, 0, 1);
  Tape t;
  auto w = BoundParams::bind(t, params);
  auto win = forward_window(t, g, inputs, w, hp, ad::Mode::kEval, rng);
  auto step = forward_step(g, t.constant(inputs.row(1).transpose()), t.constant(inputs.row(0).transpose()),
                           zero_state(t, g, hp), w, hp, ad::Mode::kEval, rng);
  EXPECT_EQ(win.predictions.value(), step.y.value());
}

TEST(ForwardWindow, EvalIsDeterministicAndStatesBounded) {
  const Hyperparams hp = tiny(0.5);
  SrnnParams params = init_params(hp, 10);
  params.spatial_lstm.weight *= 20.0;  // saturate gates
  params.node_lstm.weight *= 20.0;
  auto g = ring_with_chord(5);
  std::mt19937_64 rng(10);
  const Matrix inputs = random_matrix(30, 5, rng, 0, 1);
  EXPECT_EQ(predict_window(params, hp, g, inputs), predict_window(params, hp, g, inputs));
  Tape t;
  auto w = BoundParams::bind(t, params);
  auto r = forward_window(t, g, inputs, w, hp, ad::Mode::kTrain, rng);
  for (const Var* h : {&r.final_state.h_spatial, &r.final_state.h_temporal, &r.final_state.h_node}) {
    EXPECT_TRUE((h->value().array().abs() < 1.0).all());
  }
}

TEST(ForwardWindow, IsomorphicRelabelingPermutesOutputs) {
  const Hyperparams hp = tiny();
  const SrnnParams params = init_params(hp, 11);
  std::mt19937_64 rng(11);
  const std::size_t n = 6;
  auto g = ring_with_chord(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  // Node u of g becomes node perm[u] of h.
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (const auto& e : g.spatial_edges()) a[perm[e.from]][perm[e.to]] = 1;
  std::vector<std::string> ids(n);
  for (std::size_t u = 0; u < n; ++u) ids[perm[u]] = "x" + std::to_string(u);
  auto h = RoadGraph::build(ids, a);

  const Matrix inputs = random_matrix(5, static_cast<Index>(n), rng, 0, 1);
  Matrix relabeled(inputs.rows(), inputs.cols());
  for (std::size_t u = 0; u < n; ++u) relabeled.col(static_cast<Index>(perm[u])) = inputs.col(static_cast<Index>(u));
  const Matrix y = predict_window(params, hp, g, inputs);
  const Matrix z = predict_window(params, hp, h, relabeled);
  for (std::size_t u = 0; u < n; ++u) {
    EXPECT_LT((y.row(static_cast<Index>(u)) - z.row(static_cast<Index>(perm[u]))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardWindow, TopologyIndependentParameters) {
  const Hyperparams hp = tiny();
  const SrnnParams params = init_params(hp, 12);
  std::mt19937_64 rng(12);
  for (std::size_t n : {5u, 9u, 19u}) {
    auto g = ring_with_chord(n);
    const Matrix out = predict_window(params, hp, g, random_matrix(11, static_cast<Index>(n), rng, 0, 1));
    EXPECT_EQ(out.rows(), static_cast<Index>(n));
    EXPECT_EQ(out.cols(), 10);
    EXPECT_EQ(params.scalar_count(), param_count(hp));
  }
}

// Full model, dropout off: every weight group against central differences.
TEST(FullModel, GradientCheckAllGroups) {
  const Hyperparams hp = tiny();
  // Seed picked so no ReLU pre-activation sits within a step of its kink.
  const SrnnParams params = init_params(hp, 2024);
  auto g = three_node_two_edge();
  std::mt19937_64 rng(2024);
  const Matrix series = random_matrix(6, 3, rng, 0.1, 0.9);
  const Matrix inputs = window_inputs(series, 1, 4);
  const Matrix targets = window_targets(series, 1, 4);

  std::vector<Matrix> flat;
  std::vector<std::string> names;
  params.for_each_tensor([&](std::string_view group, std::string_view tensor, const Matrix& m) {
    flat.push_back(m);
    names.push_back(std::string(group) + "." + std::string(tensor));
  });
  auto report = ad::grad_check(
      [&](Tape& t, std::span<const Var> p) {
        BoundParams w{{p[0], p[1]},   {p[2], p[3]},   {p[4], p[5]},   {p[6], p[7]},
                      {p[8], p[9]},   {p[10], p[11]}, {p[12], p[13]}, {p[14], p[15]}};
        std::mt19937_64 unused(0);
        auto out = forward_window(t, g, inputs, w, hp, ad::Mode::kEval, unused);
        return window_loss(out.predictions, t.constant(targets));
      },
      flat, names, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error();
  for (const auto& e : report.entries) EXPECT_LE(e.max_rel_error, 1e-4) << e.name;
}

}  // namespace
}  // namespace srnn
