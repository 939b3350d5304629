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

// Structural RNN over a road graph.
//
// Three shared LSTMs: one over all spatial edges, one over all temporal
// (self) edges, one over all nodes. Every RNN processes its whole edge or
// node set as the rows of one matrix with a single weight set, so the
// parameter shapes depend on Hyperparams only and any RoadGraph can be bound
// at run time.
//
// Per step t, for node features x^t (N x 1):
//   a_S = embed([x_u, x_v] per spatial edge)      h_S = LSTM_S(a_S, h_S)
//   a_T = embed([x_u^{t-1}, x_u^t] per node)      h_T = LSTM_T(a_T, h_T)
//   H_u = [h_T(u), sum_{e in C(u)} h_S(e)]
//   a = embed(x^t)   a_H = embed(H)               h = LSTM_V([a, a_H], h)
//   y = h W_O + b_O                                (prediction of x^{t+1})

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srnn/autodiff.hpp"
#include "srnn/errors.hpp"
#include "srnn/graph.hpp"
#include "srnn/matrix.hpp"

namespace srnn {

struct Hyperparams {
  std::size_t node_hidden = 64;      // nodeRNN state size
  std::size_t spatial_hidden = 64;   // spatial edgeRNN state size
  std::size_t temporal_hidden = 64;  // temporal edgeRNN state size
  std::size_t embed = 32;
  double dropout = 0.5;

  void validate() const {
    if (node_hidden < 1 || spatial_hidden < 1 || temporal_hidden < 1 || embed < 1) {
      throw ConfigError("hyperparams: all sizes must be >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("hyperparams: dropout must be in [0, 1)");
    }
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Affine map x W + b. weight is fan_in x out, bias 1 x out.
struct LinearParams {
  Matrix weight;
  Matrix bias;
};

/// LSTM cell acting on [x, h_prev]. weight is (input + hidden) x 4*hidden with
/// gate column blocks in the order input | forget | candidate | output.
struct LstmParams {
  Matrix weight;
  Matrix bias;
  Index hidden() const { return bias.cols() / 4; }
};

struct SrnnParams {
  LinearParams spatial_embed;   // W_S^E : 2 -> embed
  LstmParams spatial_lstm;      // W_S^L : embed -> spatial_hidden
  LinearParams temporal_embed;  // W_T^E : 2 -> embed
  LstmParams temporal_lstm;     // W_T^L : embed -> temporal_hidden
  LinearParams node_embed;      // W^E   : 1 -> embed
  LinearParams context_embed;   // W_H^E : temporal_hidden + spatial_hidden -> embed
  LstmParams node_lstm;         // W^L   : 2*embed -> node_hidden
  LinearParams output;          // W^O   : node_hidden -> 1

  static constexpr std::array<std::string_view, 8> kGroupNames = {
      "spatial_embed", "spatial_lstm",  "temporal_embed", "temporal_lstm",
      "node_embed",    "context_embed", "node_lstm",      "output"};

  /// Calls f(group, tensor, matrix) for every tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) {
      n += static_cast<std::size_t>(m.size());
    });
    return n;
  }

  /// Zero tensors with the shapes implied by hp.
  static SrnnParams zeros(const Hyperparams& hp) {
    hp.validate();
    const auto e = static_cast<Index>(hp.embed);
    const auto hs = static_cast<Index>(hp.spatial_hidden);
    const auto ht = static_cast<Index>(hp.temporal_hidden);
    const auto hn = static_cast<Index>(hp.node_hidden);
    auto linear = [](Index in, Index out) {
      return LinearParams{Matrix::Zero(in, out), Matrix::Zero(1, out)};
    };
    auto lstm = [](Index in, Index hidden) {
      return LstmParams{Matrix::Zero(in + hidden, 4 * hidden), Matrix::Zero(1, 4 * hidden)};
    };
    return SrnnParams{linear(2, e),       lstm(e, hs),  linear(2, e),     lstm(e, ht),
                      linear(1, e),       linear(ht + hs, e), lstm(2 * e, hn), linear(hn, 1)};
  }

  friend bool operator==(const SrnnParams& a, const SrnnParams& b) {
    bool equal = true;
    std::vector<const Matrix*> lhs;
    a.for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) { lhs.push_back(&m); });
    std::size_t k = 0;
    b.for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) {
      const Matrix& o = *lhs[k++];
      equal = equal && o.rows() == m.rows() && o.cols() == m.cols() && o == m;
    });
    return equal;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    auto linear = [&](std::string_view group, auto& p) {
      f(group, std::string_view("weight"), p.weight);
      f(group, std::string_view("bias"), p.bias);
    };
    linear(kGroupNames[0], self.spatial_embed);
    linear(kGroupNames[1], self.spatial_lstm);
    linear(kGroupNames[2], self.temporal_embed);
    linear(kGroupNames[3], self.temporal_lstm);
    linear(kGroupNames[4], self.node_embed);
    linear(kGroupNames[5], self.context_embed);
    linear(kGroupNames[6], self.node_lstm);
    linear(kGroupNames[7], self.output);
  }
};

/// Closed-form number of trainable scalars. Only hp enters; N and |E_S| never do.
inline std::size_t param_count(const Hyperparams& hp) {
  hp.validate();
  const std::size_t e = hp.embed;
  auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };
  auto lstm = [](std::size_t in, std::size_t h) { return 4 * ((in + h) * h + h); };
  return linear(2, e) + lstm(e, hp.spatial_hidden) + linear(2, e) + lstm(e, hp.temporal_hidden) +
         linear(1, e) + linear(hp.temporal_hidden + hp.spatial_hidden, e) +
         lstm(2 * e, hp.node_hidden) + linear(hp.node_hidden, 1);
}

/// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = weight rows;
/// biases zero except the LSTM forget-gate block, which starts at 1.
inline SrnnParams init_params(const Hyperparams& hp, std::uint64_t seed) {
  SrnnParams p = SrnnParams::zeros(hp);
  std::mt19937_64 rng(seed);
  p.for_each_tensor([&](std::string_view, std::string_view tensor, Matrix& m) {
    if (tensor != "weight") return;
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  });
  for (LstmParams* l : {&p.spatial_lstm, &p.temporal_lstm, &p.node_lstm}) {
    l->bias.middleCols(l->hidden(), l->hidden()).setOnes();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tape-bound parameters and building blocks.

struct BoundLinear {
  ad::Var weight;
  ad::Var bias;
};

struct BoundLstm {
  ad::Var weight;
  ad::Var bias;
  Index hidden() const { return bias.cols() / 4; }
};

struct BoundParams {
  BoundLinear spatial_embed;
  BoundLstm spatial_lstm;
  BoundLinear temporal_embed;
  BoundLstm temporal_lstm;
  BoundLinear node_embed;
  BoundLinear context_embed;
  BoundLstm node_lstm;
  BoundLinear output;

  static BoundParams bind(ad::Tape& tape, const SrnnParams& p) {
    auto lin = [&](const LinearParams& l) {
      return BoundLinear{tape.parameter(l.weight), tape.parameter(l.bias)};
    };
    auto lstm = [&](const LstmParams& l) {
      return BoundLstm{tape.parameter(l.weight), tape.parameter(l.bias)};
    };
    return BoundParams{lin(p.spatial_embed), lstm(p.spatial_lstm), lin(p.temporal_embed),
                       lstm(p.temporal_lstm), lin(p.node_embed),  lin(p.context_embed),
                       lstm(p.node_lstm),     lin(p.output)};
  }

  /// Current adjoints arranged like SrnnParams.
  SrnnParams gradients() const {
    auto lin = [](const BoundLinear& l) { return LinearParams{l.weight.grad(), l.bias.grad()}; };
    auto lstm = [](const BoundLstm& l) { return LstmParams{l.weight.grad(), l.bias.grad()}; };
    return SrnnParams{lin(spatial_embed), lstm(spatial_lstm), lin(temporal_embed),
                      lstm(temporal_lstm), lin(node_embed),  lin(context_embed),
                      lstm(node_lstm),     lin(output)};
  }
};

/// dropout(relu(x W + b)), weights shared across rows.
inline ad::Var embed(const ad::Var& x, const BoundLinear& w, double dropout, ad::Mode mode,
                     std::mt19937_64& rng) {
  if (x.cols() != w.weight.rows()) {
    throw DimensionError("embed: input " + shape_str(x.value()) + " does not match weight " +
                         shape_str(w.weight.value()));
  }
  return ad::dropout(ad::relu(ad::add_row(ad::matmul(x, w.weight), w.bias)), dropout, mode, rng);
}

struct LstmState {
  ad::Var h;
  ad::Var c;
};

inline LstmState lstm_cell(const ad::Var& x, const ad::Var& h_prev, const ad::Var& c_prev,
                           const BoundLstm& w) {
  const Index hidden = w.hidden();
  if (x.rows() != h_prev.rows() || x.rows() != c_prev.rows()) {
    throw DimensionError("lstm_cell: row mismatch x " + shape_str(x.value()) + ", h " +
                         shape_str(h_prev.value()) + ", c " + shape_str(c_prev.value()));
  }
  if (h_prev.cols() != hidden || c_prev.cols() != hidden ||
      x.cols() + hidden != w.weight.rows()) {
    throw DimensionError("lstm_cell: x " + shape_str(x.value()) + " / h " +
                         shape_str(h_prev.value()) + " incompatible with weight " +
                         shape_str(w.weight.value()));
  }
  ad::Var z = ad::add_row(ad::matmul(ad::concat_cols(x, h_prev), w.weight), w.bias);
  ad::Var i = ad::sigmoid(ad::slice_cols(z, 0, hidden));
  ad::Var f = ad::sigmoid(ad::slice_cols(z, hidden, hidden));
  ad::Var g = ad::tanh(ad::slice_cols(z, 2 * hidden, hidden));
  ad::Var o = ad::sigmoid(ad::slice_cols(z, 3 * hidden, hidden));
  ad::Var c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  ad::Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

/// Row u of the result is the sum of h_S rows listed in incidence[u], added in
/// ascending edge order whatever order the list is given in. Nodes with no
/// incident edge get a zero row.
inline ad::Var aggregate_spatial(const ad::Var& h_spatial, const IncidenceMap& incidence) {
  std::vector<ad::Var> rows;
  rows.reserve(incidence.size());
  std::vector<std::size_t> sorted;
  for (const auto& edges : incidence) {
    sorted.assign(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end());
    rows.push_back(ad::row_sum(ad::row_select(h_spatial, sorted)));
  }
  return ad::concat_rows(rows);
}

struct SrnnState {
  ad::Var h_spatial, c_spatial;    // |E_S| x spatial_hidden
  ad::Var h_temporal, c_temporal;  // N x temporal_hidden
  ad::Var h_node, c_node;          // N x node_hidden
};

inline SrnnState zero_state(ad::Tape& tape, const RoadGraph& g, const Hyperparams& hp) {
  const auto n = static_cast<Index>(g.node_count());
  const auto es = static_cast<Index>(g.spatial_edge_count());
  auto zeros = [&](Index r, std::size_t c) { return tape.constant(Matrix::Zero(r, static_cast<Index>(c))); };
  return SrnnState{zeros(es, hp.spatial_hidden),  zeros(es, hp.spatial_hidden),
                   zeros(n, hp.temporal_hidden), zeros(n, hp.temporal_hidden),
                   zeros(n, hp.node_hidden),     zeros(n, hp.node_hidden)};
}

struct ForwardCache {
  ad::Var a_spatial, a_temporal, a_node, a_context;
  ad::Var context;  // H: N x (temporal_hidden + spatial_hidden)
  ad::Var y;        // N x 1
};

struct StepResult {
  ad::Var y;
  SrnnState state;
  ForwardCache cache;
};

/// One time step. x_t and x_prev are N x 1 scaled speeds.
inline StepResult forward_step(const RoadGraph& g, const ad::Var& x_t, const ad::Var& x_prev,
                               const SrnnState& state, const BoundParams& w,
                               const Hyperparams& hp, ad::Mode mode, std::mt19937_64& rng) {
  const auto n = static_cast<Index>(g.node_count());
  const auto es = static_cast<Index>(g.spatial_edge_count());
  if (x_t.rows() != n || x_t.cols() != 1 || x_prev.rows() != n || x_prev.cols() != 1) {
    throw BindingError("forward_step: node features " + shape_str(x_t.value()) + " / " +
                       shape_str(x_prev.value()) + " for a graph with " + std::to_string(n) +
                       " nodes");
  }
  if (state.h_spatial.rows() != es || state.c_spatial.rows() != es ||
      state.h_temporal.rows() != n || state.c_temporal.rows() != n ||
      state.h_node.rows() != n || state.c_node.rows() != n) {
    throw BindingError("forward_step: state rows do not match graph (N=" + std::to_string(n) +
                       ", |E_S|=" + std::to_string(es) + ")");
  }

  std::vector<std::size_t> from, to;
  from.reserve(g.spatial_edge_count());
  to.reserve(g.spatial_edge_count());
  for (const auto& e : g.spatial_edges()) {
    from.push_back(e.from);
    to.push_back(e.to);
  }
  ad::Var spatial_features = ad::concat_cols(ad::row_select(x_t, from), ad::row_select(x_t, to));
  ad::Var a_spatial = embed(spatial_features, w.spatial_embed, hp.dropout, mode, rng);
  LstmState spatial = lstm_cell(a_spatial, state.h_spatial, state.c_spatial, w.spatial_lstm);

  ad::Var temporal_features = ad::concat_cols(x_prev, x_t);
  ad::Var a_temporal = embed(temporal_features, w.temporal_embed, hp.dropout, mode, rng);
  LstmState temporal = lstm_cell(a_temporal, state.h_temporal, state.c_temporal, w.temporal_lstm);

  ad::Var spatial_context = aggregate_spatial(spatial.h, g.incidence());
  ad::Var context = ad::concat_cols(temporal.h, spatial_context);

  ad::Var a_node = embed(x_t, w.node_embed, hp.dropout, mode, rng);
  ad::Var a_context = embed(context, w.context_embed, hp.dropout, mode, rng);
  LstmState node = lstm_cell(ad::concat_cols(a_node, a_context), state.h_node, state.c_node, w.node_lstm);

  ad::Var y = ad::add_row(ad::matmul(node.h, w.output.weight), w.output.bias);

  return StepResult{
      y,
      SrnnState{spatial.h, spatial.c, temporal.h, temporal.c, node.h, node.c},
      ForwardCache{a_spatial, a_temporal, a_node, a_context, context, y},
  };
}

struct WindowResult {
  ad::Var predictions;  // N x l, column k predicts row t0+1+k
  std::vector<ForwardCache> caches;
  SrnnState final_state;
};

/// Runs l steps from a zero state. `inputs` holds rows t0-1 .. t0+l-1 of the
/// scaled series ((l + 1) x N).
inline WindowResult forward_window(ad::Tape& tape, const RoadGraph& g, const Matrix& inputs,
                                   const BoundParams& w, const Hyperparams& hp, ad::Mode mode,
                                   std::mt19937_64& rng) {
  if (inputs.rows() < 2 || inputs.cols() != static_cast<Index>(g.node_count())) {
    throw BindingError("forward_window: inputs " + shape_str(inputs) + " for a graph with " +
                       std::to_string(g.node_count()) + " nodes");
  }
  WindowResult result;
  SrnnState state = zero_state(tape, g, hp);
  std::vector<ad::Var> outputs;
  ad::Var x_prev = tape.constant(inputs.row(0).transpose());
  for (Index k = 1; k < inputs.rows(); ++k) {
    ad::Var x_t = tape.constant(inputs.row(k).transpose());
    StepResult step = forward_step(g, x_t, x_prev, state, w, hp, mode, rng);
    outputs.push_back(step.y);
    result.caches.push_back(step.cache);
    state = step.state;
    x_prev = x_t;
  }
  result.predictions = ad::concat_cols(outputs);
  result.final_state = state;
  return result;
}

/// Eval-mode predictions (N x l) for one window, in scaled units.
inline Matrix predict_window(const SrnnParams& params, const Hyperparams& hp, const RoadGraph& g,
                             const Matrix& inputs) {
  ad::Tape tape;
  const BoundParams w = BoundParams::bind(tape, params);
  std::mt19937_64 unused(0);
  return forward_window(tape, g, inputs, w, hp, ad::Mode::kEval, unused).predictions.value();
}

}  // namespace srnn
