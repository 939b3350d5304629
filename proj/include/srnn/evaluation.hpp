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

// RMSE scoring, persistence / historical-average baselines and the
// train-graph x eval-graph RMSE matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "srnn/checkpoint.hpp"
#include "srnn/dataset.hpp"
#include "srnn/model.hpp"
#include "srnn/prepared.hpp"

namespace srnn {

inline double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw MetricError("rmse: need equal, non-empty inputs (got " + std::to_string(predictions.size()) +
                      " and " + std::to_string(truths.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

struct EvalResult {
  double rmse_kmh = 0.0;              // final window step only
  std::vector<double> per_step_rmse;  // step k of every window, k = 0 .. l-1
  std::size_t windows = 0;
};

namespace detail {

/// Runs fn(i) for i in [0, count) over contiguous chunks on `threads` workers.
/// Each index is handled by exactly one worker, so results written per index
/// are independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(count, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline EvalResult score(const std::vector<Matrix>& predictions_kmh, const Matrix& truth_kmh,
                        const WindowSpec& windows) {
  const std::size_t l = windows.seq_len;
  EvalResult r;
  r.windows = windows.starts.size();
  std::vector<std::vector<double>> pred(l), truth(l);
  for (std::size_t i = 0; i < windows.starts.size(); ++i) {
    const std::size_t t0 = windows.starts[i];
    for (std::size_t k = 0; k < l; ++k) {
      for (Index u = 0; u < truth_kmh.cols(); ++u) {
        pred[k].push_back(predictions_kmh[i](u, static_cast<Index>(k)));
        truth[k].push_back(truth_kmh(static_cast<Index>(t0 + 1 + k), u));
      }
    }
  }
  for (std::size_t k = 0; k < l; ++k) r.per_step_rmse.push_back(rmse(pred[k], truth[k]));
  r.rmse_kmh = r.per_step_rmse.back();
  return r;
}

}  // namespace detail

/// Eval-mode forward over every window in `rows`. Inputs are scaled with
/// `scaler`, predictions are inverted with it and compared to `values_kmh`.
inline EvalResult evaluate(const SrnnParams& params, const Hyperparams& hp, const RoadGraph& g,
                           const Matrix& values_kmh, RowRange rows, std::size_t seq_len,
                           const Scaler& scaler, std::size_t threads = 0) {
  const WindowSpec windows = make_windows(rows, seq_len);
  const Matrix scaled = scaler.apply(values_kmh);
  std::vector<Matrix> predictions(windows.starts.size());
  detail::parallel_for(windows.starts.size(), threads, [&](std::size_t i) {
    predictions[i] =
        scaler.invert(predict_window(params, hp, g, window_inputs(scaled, windows.starts[i], seq_len)));
  });
  return detail::score(predictions, values_kmh, windows);
}

/// Scores a checkpoint on the eval rows of `target`, scaling with the
/// checkpoint's own scaler.
inline EvalResult evaluate(const Checkpoint& ck, const PreparedData& target, std::size_t threads = 0) {
  return evaluate(ck.params, ck.hp, target.graph, target.data.values, target.split.eval,
                  target.seq_len, ck.scaler, threads);
}

enum class BaselineKind { kPersistence, kHistoricalAverage };

inline std::string to_string(BaselineKind k) {
  return k == BaselineKind::kPersistence ? "persistence" : "historical_average";
}

/// Training-set mean per (time-of-day slot, segment).
class HistoricalAverage {
 public:
  HistoricalAverage(const SpeedDataset& data, RowRange train) {
    const int slots = data.slots_per_day();
    const auto n = static_cast<Index>(data.segments());
    Matrix sum = Matrix::Zero(slots, n);
    std::vector<double> count(static_cast<std::size_t>(slots), 0.0);
    Matrix total = Matrix::Zero(1, n);
    for (std::size_t t = train.begin; t < train.end; ++t) {
      sum.row(data.slot(t)) += data.values.row(static_cast<Index>(t));
      count[static_cast<std::size_t>(data.slot(t))] += 1.0;
      total += data.values.row(static_cast<Index>(t));
    }
    means_ = Matrix(slots, n);
    for (int s = 0; s < slots; ++s) {
      // Slots never seen in training fall back to the overall training mean.
      means_.row(s) = count[static_cast<std::size_t>(s)] > 0.0
                          ? Matrix(sum.row(s) / count[static_cast<std::size_t>(s)])
                          : Matrix(total / static_cast<double>(train.size()));
    }
  }

  double predict(int slot, std::size_t segment) const {
    return means_(slot, static_cast<Index>(segment));
  }
  const Matrix& slot_means() const { return means_; }

 private:
  Matrix means_;
};

/// Baseline predictions (N x l, km/h) for the window starting at t0.
/// Column k forecasts row t0+1+k.
inline Matrix baseline_predict(BaselineKind kind, const SpeedDataset& data, std::size_t t0,
                               std::size_t seq_len, const HistoricalAverage* history = nullptr) {
  Matrix out(static_cast<Index>(data.segments()), static_cast<Index>(seq_len));
  for (std::size_t k = 0; k < seq_len; ++k) {
    const std::size_t target = t0 + 1 + k;
    for (std::size_t u = 0; u < data.segments(); ++u) {
      double v = 0.0;
      if (kind == BaselineKind::kPersistence) {
        v = data.values(static_cast<Index>(target - 1), static_cast<Index>(u));
      } else {
        if (history == nullptr) throw ContractError("historical average baseline needs training statistics");
        v = history->predict(data.slot(target), u);
      }
      out(static_cast<Index>(u), static_cast<Index>(k)) = v;
    }
  }
  return out;
}

inline EvalResult evaluate_baseline(BaselineKind kind, const PreparedData& p) {
  const WindowSpec windows = make_windows(p.split.eval, p.seq_len);
  const HistoricalAverage history(p.data, p.split.train);
  std::vector<Matrix> predictions;
  predictions.reserve(windows.starts.size());
  for (std::size_t t0 : windows.starts) {
    predictions.push_back(baseline_predict(kind, p.data, t0, p.seq_len, &history));
  }
  return detail::score(predictions, p.data.values, windows);
}

struct EvalReport {
  std::vector<std::string> sources;  // checkpoint labels (rows)
  std::vector<std::string> targets;  // dataset labels (columns)
  Matrix rmse;                       // sources x targets, km/h
  std::vector<std::vector<std::vector<double>>> per_step_rmse;  // [source][target][k]
  std::vector<std::size_t> source_param_counts;
  std::vector<std::size_t> target_nodes;
  std::vector<std::size_t> target_windows;
  std::vector<double> persistence_rmse;          // per target
  std::vector<double> historical_average_rmse;   // per target
  std::string scaling = "target";                // whose scaler maps inputs/outputs
  std::uint64_t seed = 0;

  double mean_diagonal() const;
  double mean_off_diagonal() const;
};

inline double EvalReport::mean_diagonal() const {
  const Index n = std::min(rmse.rows(), rmse.cols());
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += rmse(i, i);
  return n > 0 ? s / static_cast<double>(n) : 0.0;
}

inline double EvalReport::mean_off_diagonal() const {
  double s = 0.0;
  std::size_t count = 0;
  for (Index i = 0; i < rmse.rows(); ++i)
    for (Index j = 0; j < rmse.cols(); ++j)
      if (i != j) {
        s += rmse(i, j);
        ++count;
      }
  return count > 0 ? s / static_cast<double>(count) : 0.0;
}

/// Every checkpoint against every target's eval rows. Each cell scales inputs
/// and inverts outputs with the TARGET dataset's scaler.
inline EvalReport cross_matrix(const std::vector<Checkpoint>& sources,
                               const std::vector<std::string>& source_labels,
                               const std::vector<PreparedData>& targets,
                               const std::vector<std::string>& target_labels,
                               std::size_t threads = 0) {
  if (sources.size() != source_labels.size() || targets.size() != target_labels.size()) {
    throw ContractError("cross_matrix: label count mismatch");
  }
  for (const auto& ck : sources) {
    if (!(ck.hp == sources.front().hp)) {
      throw ConfigError("cross_matrix: checkpoints do not share hyperparameters");
    }
  }
  EvalReport report;
  report.sources = source_labels;
  report.targets = target_labels;
  report.rmse = Matrix::Zero(static_cast<Index>(sources.size()), static_cast<Index>(targets.size()));
  report.per_step_rmse.assign(sources.size(), std::vector<std::vector<double>>(targets.size()));
  for (const auto& ck : sources) report.source_param_counts.push_back(ck.params.scalar_count());
  for (const auto& t : targets) {
    report.target_nodes.push_back(t.graph.node_count());
    report.target_windows.push_back(make_windows(t.split.eval, t.seq_len).starts.size());
    report.persistence_rmse.push_back(evaluate_baseline(BaselineKind::kPersistence, t).rmse_kmh);
    report.historical_average_rmse.push_back(evaluate_baseline(BaselineKind::kHistoricalAverage, t).rmse_kmh);
  }
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto& target = targets[t];
      const EvalResult r = evaluate(sources[s].params, sources[s].hp, target.graph, target.data.values,
                                    target.split.eval, target.seq_len, target.scaler, threads);
      report.rmse(static_cast<Index>(s), static_cast<Index>(t)) = r.rmse_kmh;
      report.per_step_rmse[s][t] = r.per_step_rmse;
    }
  }
  return report;
}

inline std::string report_csv(const EvalReport& r) {
  std::string out = "train\\eval";
  for (const auto& t : r.targets) out += "," + t;
  out += "\n";
  for (Index s = 0; s < r.rmse.rows(); ++s) {
    out += r.sources[static_cast<std::size_t>(s)];
    for (Index t = 0; t < r.rmse.cols(); ++t) out += "," + text::format_double(r.rmse(s, t));
    out += "\n";
  }
  out += "persistence";
  for (double v : r.persistence_rmse) out += "," + text::format_double(v);
  out += "\nhistorical_average";
  for (double v : r.historical_average_rmse) out += "," + text::format_double(v);
  out += "\n";
  return out;
}

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["format"] = "srnn-eval-report";
  j["version"] = 1;
  j["metric"] = "rmse_kmh";
  j["scoring"] = "final window step (one next-step prediction per window)";
  j["scaling"] = r.scaling;
  j["seed"] = r.seed;
  j["sources"] = r.sources;
  j["targets"] = r.targets;
  nlohmann::json cells = nlohmann::json::array();
  for (Index s = 0; s < r.rmse.rows(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (Index t = 0; t < r.rmse.cols(); ++t) row.push_back(r.rmse(s, t));
    cells.push_back(row);
  }
  j["rmse"] = cells;
  j["per_step_rmse"] = r.per_step_rmse;
  j["source_param_counts"] = r.source_param_counts;
  j["target_nodes"] = r.target_nodes;
  j["target_windows"] = r.target_windows;
  j["baselines"] = {{"persistence", r.persistence_rmse},
                    {"historical_average", r.historical_average_rmse}};
  j["mean_diagonal"] = r.mean_diagonal();
  j["mean_off_diagonal"] = r.mean_off_diagonal();
  j["extra_metrics"] = nlohmann::json::object();
  return j;
}

}  // namespace srnn
