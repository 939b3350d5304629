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

// End-to-end training: per-window MSE, joint backpropagation through the
// three RNNs, global-norm clipping and Adam with per-epoch exponential
// learning-rate decay.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "srnn/autodiff.hpp"
#include "srnn/checkpoint.hpp"
#include "srnn/evaluation.hpp"
#include "srnn/model.hpp"
#include "srnn/prepared.hpp"

namespace srnn {

struct TrainConfig {
  std::size_t epochs = 10;
  double lr0 = 0.0005;
  double decay = 0.99;
  double grad_clip = 5.0;  // max global L2 norm; <= 0 disables clipping
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t eval_threads = 0;  // 0 = hardware concurrency
  bool eval_each_epoch = true;

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train: decay must be in (0, 1]");
  }
};

/// lr for a zero-based epoch, built by repeated multiplication so that
/// lr(e + 1) == lr(e) * decay holds exactly.
inline double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.lr0;
  for (std::size_t e = 0; e < epoch; ++e) lr *= cfg.decay;
  return lr;
}

struct AdamState {
  SrnnParams m;
  SrnnParams v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const Hyperparams& hp) {
    return AdamState{SrnnParams::zeros(hp), SrnnParams::zeros(hp)};
  }
};

/// Window-level MSE in scaled units.
inline double window_loss(const Matrix& predictions, const Matrix& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw DimensionError("window_loss: predictions " + shape_str(predictions) + " vs targets " +
                         shape_str(targets));
  }
  if (predictions.size() == 0) throw DimensionError("window_loss: empty window");
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

inline ad::Var window_loss(const ad::Var& predictions, const ad::Var& targets) {
  return ad::mse(predictions, targets);
}

/// Tensors visited in the same order in both objects.
template <typename F>
void zip_tensors(SrnnParams& a, const SrnnParams& b, F&& f) {
  std::vector<const Matrix*> rhs;
  b.for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) { rhs.push_back(&m); });
  std::size_t k = 0;
  a.for_each_tensor([&](std::string_view group, std::string_view tensor, Matrix& m) {
    f(group, tensor, m, *rhs[k++]);
  });
}

inline double global_norm(const SrnnParams& grads) {
  double sq = 0.0;
  grads.for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

/// Rescales all gradients together so that their global L2 norm is at most max_norm.
inline void clip_gradients(SrnnParams& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    grads.for_each_tensor([&](std::string_view, std::string_view, Matrix& m) { m *= s; });
  }
}

inline void adam_step(SrnnParams& params, const SrnnParams& grads, AdamState& state, double lr) {
  grads.for_each_tensor([](std::string_view group, std::string_view tensor, const Matrix& g) {
    if (!g.allFinite()) {
      throw TrainingError("non-finite gradient in parameter group '" + std::string(group) + "' (" +
                          std::string(tensor) + ")");
    }
  });
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  zip_tensors(state.m, grads, [&](std::string_view, std::string_view, Matrix& m, const Matrix& g) {
    m = b1 * m + (1.0 - b1) * g;
  });
  zip_tensors(state.v, grads, [&](std::string_view, std::string_view, Matrix& v, const Matrix& g) {
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  });
  std::vector<const Matrix*> ms, vs;
  state.m.for_each_tensor([&](std::string_view, std::string_view, const Matrix& m) { ms.push_back(&m); });
  state.v.for_each_tensor([&](std::string_view, std::string_view, const Matrix& v) { vs.push_back(&v); });
  std::size_t k = 0;
  params.for_each_tensor([&](std::string_view, std::string_view, Matrix& p) {
    const Matrix& m = *ms[k];
    const Matrix& v = *vs[k];
    ++k;
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  });
}

struct StepOutcome {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

/// Forward, backward and one Adam update on a single window.
inline StepOutcome train_step(SrnnParams& params, AdamState& adam, const Hyperparams& hp,
                              const RoadGraph& g, const Matrix& inputs, const Matrix& targets,
                              double lr, double grad_clip, std::mt19937_64& rng) {
  ad::Tape tape;
  const BoundParams w = BoundParams::bind(tape, params);
  const WindowResult out = forward_window(tape, g, inputs, w, hp, ad::Mode::kTrain, rng);
  ad::Var loss = window_loss(out.predictions, tape.constant(targets));
  StepOutcome r;
  r.loss = loss.value()(0, 0);
  if (!std::isfinite(r.loss)) return r;
  tape.backward(loss);
  SrnnParams grads = w.gradients();
  r.grad_norm = global_norm(grads);
  clip_gradients(grads, grad_clip);
  adam_step(params, grads, adam, lr);
  return r;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean window MSE, scaled units
  double eval_rmse = 0.0;   // km/h, final-step scoring on eval rows
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

inline std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,eval_rmse_kmh\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + text::format_double(r.lr) + "," +
           text::format_double(r.train_loss) + "," + text::format_double(r.eval_rmse) + "\n";
  }
  return out;
}

/// Mean eval RMSE over all recorded epochs.
inline double mean_eval_rmse(const std::vector<EpochRecord>& history) {
  if (history.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : history) s += r.eval_rmse;
  return s / static_cast<double>(history.size());
}

inline TrainResult train(const PreparedData& data, const Hyperparams& hp, const TrainConfig& cfg,
                         std::ostream* log = nullptr) {
  hp.validate();
  cfg.validate();
  TrainResult result;
  result.checkpoint.hp = hp;
  result.checkpoint.scaler = data.scaler;
  result.checkpoint.params = init_params(hp, cfg.seed);
  AdamState adam = AdamState::for_params(hp);

  const Matrix scaled = data.scaled();
  const WindowSpec windows = make_windows(data.split.train, data.seq_len);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(windows.starts.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t t0 = windows.starts[order[i]];
      const StepOutcome step =
          train_step(result.checkpoint.params, adam, hp, data.graph, window_inputs(scaled, t0, data.seq_len),
                     window_targets(scaled, t0, data.seq_len), lr, cfg.grad_clip, rng);
      if (!std::isfinite(step.loss)) {
        throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                            ", window " + std::to_string(i) + " (start row " + std::to_string(t0) + ")");
      }
      loss_sum += step.loss;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    if (cfg.eval_each_epoch) {
      rec.eval_rmse = evaluate(result.checkpoint, data, cfg.eval_threads).rmse_kmh;
    }
    result.history.push_back(rec);
    if (log != nullptr) {
      *log << "epoch " << rec.epoch << " lr " << rec.lr << " train_loss " << rec.train_loss;
      if (cfg.eval_each_epoch) *log << " eval_rmse " << rec.eval_rmse << " km/h";
      *log << "\n";
    }
  }
  nlohmann::json meta;
  meta["epochs"] = cfg.epochs;
  meta["lr0"] = cfg.lr0;
  meta["decay"] = cfg.decay;
  meta["grad_clip"] = cfg.grad_clip;
  meta["seed"] = cfg.seed;
  meta["shuffle"] = cfg.shuffle;
  meta["seq_len"] = data.seq_len;
  meta["train_windows"] = windows.starts.size();
  meta["trained_on_nodes"] = data.graph.node_count();
  result.checkpoint.meta = meta.dump();
  return result;
}

}  // namespace srnn
