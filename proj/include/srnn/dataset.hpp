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

// Speed time series: CSV ingestion, same-slot imputation, chronological split,
// min/max scaling fitted on training rows, and sliding-window enumeration.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "srnn/errors.hpp"
#include "srnn/graph.hpp"
#include "srnn/matrix.hpp"
#include "srnn/text.hpp"

namespace srnn {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kDefaultStepMinutes = 15;

struct SpeedDataset {
  std::vector<std::string> segment_ids;
  std::vector<std::int64_t> timestamps;  // minutes since 1970-01-01 UTC
  int step_minutes = kDefaultStepMinutes;
  Matrix values;                       // T x N km/h, NaN where missing and not yet imputed
  std::vector<std::uint8_t> missing;   // T x N row-major, 1 = missing in the source file

  std::size_t steps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t segments() const { return static_cast<std::size_t>(values.cols()); }
  bool is_missing(std::size_t t, std::size_t u) const { return missing[t * segments() + u] != 0; }

  int slots_per_day() const { return kMinutesPerDay / step_minutes; }

  /// Time-of-day slot of row t.
  int slot(std::size_t t) const {
    const std::int64_t m = ((timestamps[t] % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay;
    return static_cast<int>(m / step_minutes);
  }

  friend bool operator==(const SpeedDataset& a, const SpeedDataset& b) {
    if (a.segment_ids != b.segment_ids || a.timestamps != b.timestamps ||
        a.step_minutes != b.step_minutes || a.missing != b.missing ||
        a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
      return false;
    }
    for (Index k = 0; k < a.values.size(); ++k) {
      const double x = a.values.data()[k];
      const double y = b.values.data()[k];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
  }
};

inline constexpr const char* kSegmentColumnPrefix = "seg_";

/// Speeds CSV: header "timestamp,seg_<id>,...", strictly increasing timestamps
/// at a fixed step, empty cells for missing readings.
inline SpeedDataset parse_speeds_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("speeds: empty file");
  const auto header = text::split_csv(text::trim(line));
  if (header.empty() || header[0] != "timestamp") {
    throw ParseError("speeds: header must start with 'timestamp'");
  }
  SpeedDataset ds;
  const std::string prefix = kSegmentColumnPrefix;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind(prefix, 0) != 0 || header[c].size() == prefix.size()) {
      throw LookupError("speeds: column '" + header[c] + "' is not a segment column (seg_<id>)");
    }
    ds.segment_ids.push_back(header[c].substr(prefix.size()));
  }
  if (ds.segment_ids.empty()) throw ParseError("speeds: no segment columns");
  const std::size_t n = ds.segment_ids.size();

  std::vector<double> flat;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = text::trim(line);
    if (line.empty()) continue;
    ++row;
    const auto cells = text::split_csv(line);
    if (cells.size() != n + 1) {
      throw ParseError("speeds: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(n + 1));
    }
    const auto ts = text::parse_timestamp(cells[0]);
    if (!ts) throw ParseError("speeds: row " + std::to_string(row) + " bad timestamp '" + cells[0] + "'");
    if (!ds.timestamps.empty()) {
      const std::int64_t delta = *ts - ds.timestamps.back();
      if (ds.timestamps.size() == 1) {
        if (delta <= 0) {
          throw ParseError("speeds: row " + std::to_string(row) + " timestamp not increasing");
        }
        ds.step_minutes = static_cast<int>(delta);
      } else if (delta != ds.step_minutes) {
        throw ParseError("speeds: row " + std::to_string(row) + " irregular timestamp step (" +
                         std::to_string(delta) + " min, expected " + std::to_string(ds.step_minutes) + ")");
      }
    }
    ds.timestamps.push_back(*ts);
    for (std::size_t c = 1; c <= n; ++c) {
      if (cells[c].empty()) {
        flat.push_back(std::numeric_limits<double>::quiet_NaN());
        ds.missing.push_back(1);
        continue;
      }
      const auto v = text::parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("speeds: row " + std::to_string(row) + " bad value '" + cells[c] + "'");
      }
      if (*v < 0.0) {
        throw DataError("speeds: row " + std::to_string(row) + " negative speed for segment '" +
                        ds.segment_ids[c - 1] + "'");
      }
      flat.push_back(*v);
      ds.missing.push_back(0);
    }
  }
  if (ds.timestamps.empty()) throw ParseError("speeds: no data rows");
  ds.values = Eigen::Map<Matrix>(flat.data(), static_cast<Index>(ds.timestamps.size()),
                                 static_cast<Index>(n));
  return ds;
}

inline SpeedDataset load_speeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open speeds file '" + path + "'");
  return parse_speeds_csv(in);
}

inline void write_speeds_csv(std::ostream& out, const SpeedDataset& ds) {
  out << "timestamp";
  for (const auto& id : ds.segment_ids) out << ',' << kSegmentColumnPrefix << id;
  out << '\n';
  for (std::size_t t = 0; t < ds.steps(); ++t) {
    out << text::format_timestamp(ds.timestamps[t]);
    for (std::size_t u = 0; u < ds.segments(); ++u) {
      out << ',';
      const double v = ds.values(static_cast<Index>(t), static_cast<Index>(u));
      if (!std::isnan(v)) out << text::format_double(v);
    }
    out << '\n';
  }
}

inline void save_speeds(const std::string& path, const SpeedDataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write speeds file '" + path + "'");
  write_speeds_csv(out, ds);
}

/// Reorders columns to follow the graph's segment order.
inline SpeedDataset align_to_graph(const SpeedDataset& ds, const RoadGraph& g) {
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t u = 0; u < ds.segments(); ++u) {
    if (!col.emplace(ds.segment_ids[u], u).second) {
      throw ValidationError("speeds: duplicate segment column '" + ds.segment_ids[u] + "'");
    }
    g.index_of(ds.segment_ids[u]);  // throws LookupError for unknown ids
  }
  SpeedDataset out;
  out.segment_ids = g.segment_ids();
  out.timestamps = ds.timestamps;
  out.step_minutes = ds.step_minutes;
  out.values.resize(ds.values.rows(), static_cast<Index>(g.node_count()));
  out.missing.assign(ds.steps() * g.node_count(), 0);
  for (std::size_t u = 0; u < g.node_count(); ++u) {
    auto it = col.find(g.segment_ids()[u]);
    if (it == col.end()) {
      throw LookupError("speeds: no column for segment '" + g.segment_ids()[u] + "'");
    }
    out.values.col(static_cast<Index>(u)) = ds.values.col(static_cast<Index>(it->second));
    for (std::size_t t = 0; t < ds.steps(); ++t) {
      out.missing[t * g.node_count() + u] = ds.missing[t * ds.segments() + it->second];
    }
  }
  return out;
}

struct ImputeSummary {
  std::size_t imputed = 0;
  std::size_t fallback = 0;                       // cells filled by the global-mean rule
  std::vector<std::string> fallback_segments;     // segments that needed the fallback
};

/// Fills each missing (t, u) with the mean of u's present readings in the same
/// time-of-day slot on other days; if that slot has no readings at all, with
/// u's mean over all present readings. Donors are always the originally
/// present cells, so the operation is idempotent.
inline SpeedDataset impute(const SpeedDataset& ds, ImputeSummary* summary = nullptr) {
  if (ds.step_minutes <= 0 || kMinutesPerDay % ds.step_minutes != 0) {
    throw ConfigError("impute: step of " + std::to_string(ds.step_minutes) +
                      " minutes does not divide a day");
  }
  SpeedDataset out = ds;
  ImputeSummary local;
  const int slots = ds.slots_per_day();
  for (std::size_t u = 0; u < ds.segments(); ++u) {
    std::vector<double> slot_sum(static_cast<std::size_t>(slots), 0.0);
    std::vector<std::size_t> slot_count(static_cast<std::size_t>(slots), 0);
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t t = 0; t < ds.steps(); ++t) {
      if (ds.is_missing(t, u)) continue;
      const double v = ds.values(static_cast<Index>(t), static_cast<Index>(u));
      slot_sum[static_cast<std::size_t>(ds.slot(t))] += v;
      ++slot_count[static_cast<std::size_t>(ds.slot(t))];
      total += v;
      ++present;
    }
    if (present == 0) {
      throw DataError("impute: segment '" + ds.segment_ids[u] + "' has no readings");
    }
    bool used_fallback = false;
    for (std::size_t t = 0; t < ds.steps(); ++t) {
      if (!ds.is_missing(t, u)) continue;
      const auto s = static_cast<std::size_t>(ds.slot(t));
      double fill = 0.0;
      if (slot_count[s] > 0) {
        fill = slot_sum[s] / static_cast<double>(slot_count[s]);
      } else {
        fill = total / static_cast<double>(present);
        ++local.fallback;
        used_fallback = true;
      }
      out.values(static_cast<Index>(t), static_cast<Index>(u)) = fill;
      ++local.imputed;
    }
    if (used_fallback) local.fallback_segments.push_back(ds.segment_ids[u]);
  }
  if (summary != nullptr) *summary = std::move(local);
  return out;
}

/// Half-open row interval [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct Split {
  RowRange train;
  RowRange eval;
};

inline constexpr double kDefaultTrainFraction = 0.75;
inline constexpr std::size_t kDefaultSeqLen = 10;

/// Chronological prefix/suffix split at floor(T * fraction). Each side must
/// hold at least seq_len + 2 rows so that it yields one window.
inline Split split_rows(std::size_t steps, double fraction, std::size_t seq_len) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split: fraction " + text::format_double(fraction) + " outside (0, 1)");
  }
  const auto boundary = static_cast<std::size_t>(std::floor(static_cast<double>(steps) * fraction));
  if (boundary < seq_len + 2 || steps - boundary < seq_len + 2) {
    throw ConfigError("split: " + std::to_string(boundary) + "/" + std::to_string(steps - boundary) +
                      " rows leaves a side shorter than seq_len + 2 = " + std::to_string(seq_len + 2));
  }
  return {{0, boundary}, {boundary, steps}};
}

class Scaler {
 public:
  Scaler() = default;
  Scaler(double min, double max) : min_(min), max_(max) {
    if (!(max > min)) {
      throw DataError("scaler: degenerate range [" + text::format_double(min) + ", " +
                      text::format_double(max) + "]");
    }
  }

  /// Fits min/max over every cell in `rows`.
  static Scaler fit(const Matrix& values, RowRange rows) {
    if (rows.size() == 0 || rows.end > static_cast<std::size_t>(values.rows())) {
      throw DataError("scaler: invalid training rows");
    }
    const auto block = values.middleRows(static_cast<Index>(rows.begin), static_cast<Index>(rows.size()));
    return Scaler(block.minCoeff(), block.maxCoeff());
  }

  double min() const { return min_; }
  double max() const { return max_; }

  double apply(double x) const { return (x - min_) / (max_ - min_); }
  double invert(double y) const { return y * (max_ - min_) + min_; }

  Matrix apply(const Matrix& x) const {
    return x.unaryExpr([this](double v) { return apply(v); });
  }
  Matrix invert(const Matrix& y) const {
    return y.unaryExpr([this](double v) { return invert(v); });
  }

  friend bool operator==(const Scaler&, const Scaler&) = default;

 private:
  double min_ = 0.0;
  double max_ = 1.0;
};

/// Window starts over a row range. A window at t0 reads inputs t0-1 .. t0+l-1
/// (t0-1 feeds the first temporal edge) and targets t0+1 .. t0+l.
struct WindowSpec {
  std::size_t seq_len = kDefaultSeqLen;
  std::vector<std::size_t> starts;
};

inline WindowSpec make_windows(RowRange rows, std::size_t seq_len) {
  if (seq_len < 1) throw ConfigError("windows: seq_len must be >= 1");
  if (rows.size() < seq_len + 2) {
    throw ConfigError("windows: " + std::to_string(rows.size()) + " rows, need at least seq_len + 2 = " +
                      std::to_string(seq_len + 2));
  }
  WindowSpec spec;
  spec.seq_len = seq_len;
  for (std::size_t t0 = rows.begin + 1; t0 + seq_len + 1 <= rows.end; ++t0) spec.starts.push_back(t0);
  return spec;
}

/// Rows t0-1 .. t0+l-1 of `scaled` (l + 1 rows, N columns).
inline Matrix window_inputs(const Matrix& scaled, std::size_t t0, std::size_t seq_len) {
  return scaled.middleRows(static_cast<Index>(t0 - 1), static_cast<Index>(seq_len + 1));
}

/// Targets as N x l: column k holds row t0+1+k.
inline Matrix window_targets(const Matrix& scaled, std::size_t t0, std::size_t seq_len) {
  return scaled.middleRows(static_cast<Index>(t0 + 1), static_cast<Index>(seq_len)).transpose();
}

}  // namespace srnn
