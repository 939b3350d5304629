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

// Prepared dataset: graph-aligned, imputed speeds plus the fitted scaler and
// split, cached as one JSON document so later runs skip ingestion.
//
// Cache header fields (top-level JSON keys):
//   format          "srnn-prepared"
//   version         kPreparedVersion
//   segment_ids     [string]            column order, equals the graph order
//   adjacency       [[0|1]]             N x N, row = from, column = to
//   start           "YYYY-MM-DDTHH:MM"  timestamp of row 0
//   step_minutes    int
//   steps           int                 T
//   train_fraction  float
//   split_index     int                 first eval row
//   seq_len         int
//   scaler          {"min": km/h, "max": km/h}
//   imputation      {"imputed": int, "fallback": int, "fallback_segments": [string]}
//   values          [[km/h]]            T rows of N imputed speeds
//   missing         [[0|1]]             T rows of N source-missing flags

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"
#include "srnn/dataset.hpp"
#include "srnn/graph.hpp"

namespace srnn {

inline constexpr int kPreparedVersion = 1;

struct PreparedData {
  RoadGraph graph;
  SpeedDataset data;  // imputed, columns in graph order
  Scaler scaler;      // fitted on split.train only
  Split split;
  double train_fraction = kDefaultTrainFraction;
  std::size_t seq_len = kDefaultSeqLen;
  ImputeSummary imputation;

  Matrix scaled() const { return scaler.apply(data.values); }
};

inline PreparedData prepare(const RoadGraph& graph, const SpeedDataset& raw,
                            double train_fraction = kDefaultTrainFraction,
                            std::size_t seq_len = kDefaultSeqLen) {
  PreparedData p;
  p.graph = graph;
  p.data = impute(align_to_graph(raw, graph), &p.imputation);
  p.train_fraction = train_fraction;
  p.seq_len = seq_len;
  p.split = split_rows(p.data.steps(), train_fraction, seq_len);
  p.scaler = Scaler::fit(p.data.values, p.split.train);
  return p;
}

inline std::string encode_prepared(const PreparedData& p) {
  using nlohmann::json;
  json j;
  j["format"] = "srnn-prepared";
  j["version"] = kPreparedVersion;
  j["segment_ids"] = p.graph.segment_ids();
  j["adjacency"] = p.graph.adjacency();
  j["start"] = text::format_timestamp(p.data.timestamps.front());
  j["step_minutes"] = p.data.step_minutes;
  j["steps"] = p.data.steps();
  j["train_fraction"] = p.train_fraction;
  j["split_index"] = p.split.eval.begin;
  j["seq_len"] = p.seq_len;
  j["scaler"] = {{"min", p.scaler.min()}, {"max", p.scaler.max()}};
  j["imputation"] = {{"imputed", p.imputation.imputed},
                     {"fallback", p.imputation.fallback},
                     {"fallback_segments", p.imputation.fallback_segments}};
  json values = json::array();
  json missing = json::array();
  for (std::size_t t = 0; t < p.data.steps(); ++t) {
    json vrow = json::array();
    json mrow = json::array();
    for (std::size_t u = 0; u < p.data.segments(); ++u) {
      vrow.push_back(p.data.values(static_cast<Index>(t), static_cast<Index>(u)));
      mrow.push_back(p.data.is_missing(t, u) ? 1 : 0);
    }
    values.push_back(std::move(vrow));
    missing.push_back(std::move(mrow));
  }
  j["values"] = std::move(values);
  j["missing"] = std::move(missing);
  return j.dump() + "\n";
}

inline PreparedData decode_prepared(const std::string& content) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw ParseError(std::string("prepared dataset: ") + e.what());
  }
  try {
    if (j.at("format") != "srnn-prepared") throw ParseError("prepared dataset: wrong format tag");
    if (j.at("version").get<int>() != kPreparedVersion) {
      throw ParseError("prepared dataset: unsupported version " + j.at("version").dump());
    }
    PreparedData p;
    p.graph = RoadGraph::build(j.at("segment_ids").get<std::vector<std::string>>(),
                               j.at("adjacency").get<std::vector<std::vector<int>>>());
    const auto start = text::parse_timestamp(j.at("start").get<std::string>());
    if (!start) throw ParseError("prepared dataset: bad start timestamp");
    const auto steps = j.at("steps").get<std::size_t>();
    const std::size_t n = p.graph.node_count();
    p.data.segment_ids = p.graph.segment_ids();
    p.data.step_minutes = j.at("step_minutes").get<int>();
    for (std::size_t t = 0; t < steps; ++t) {
      p.data.timestamps.push_back(*start + static_cast<std::int64_t>(t) * p.data.step_minutes);
    }
    const auto& values = j.at("values");
    const auto& missing = j.at("missing");
    if (values.size() != steps || missing.size() != steps) {
      throw ParseError("prepared dataset: row count does not match 'steps'");
    }
    p.data.values.resize(static_cast<Index>(steps), static_cast<Index>(n));
    p.data.missing.assign(steps * n, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      if (values[t].size() != n || missing[t].size() != n) {
        throw ParseError("prepared dataset: row " + std::to_string(t) + " has wrong width");
      }
      for (std::size_t u = 0; u < n; ++u) {
        p.data.values(static_cast<Index>(t), static_cast<Index>(u)) = values[t][u].get<double>();
        p.data.missing[t * n + u] = static_cast<std::uint8_t>(missing[t][u].get<int>());
      }
    }
    p.train_fraction = j.at("train_fraction").get<double>();
    p.seq_len = j.at("seq_len").get<std::size_t>();
    p.split = split_rows(steps, p.train_fraction, p.seq_len);
    if (p.split.eval.begin != j.at("split_index").get<std::size_t>()) {
      throw ParseError("prepared dataset: split_index inconsistent with train_fraction");
    }
    p.scaler = Scaler(j.at("scaler").at("min").get<double>(), j.at("scaler").at("max").get<double>());
    const auto& imp = j.at("imputation");
    p.imputation.imputed = imp.at("imputed").get<std::size_t>();
    p.imputation.fallback = imp.at("fallback").get<std::size_t>();
    p.imputation.fallback_segments = imp.at("fallback_segments").get<std::vector<std::string>>();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("prepared dataset: ") + e.what());
  }
}

inline void save_prepared(const std::string& path, const PreparedData& p) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write prepared dataset '" + path + "'");
  out << encode_prepared(p);
}

inline PreparedData load_prepared(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prepared dataset '" + path + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_prepared(content);
}

/// True if the file looks like a prepared-dataset cache rather than a CSV.
inline bool is_prepared_file(const std::string& path) {
  std::ifstream in(path);
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  }
  return false;
}

}  // namespace srnn
