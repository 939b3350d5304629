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

// Road network topology: directed spatial edges between segments, implicit
// temporal self-edges, and the per-node incidence lists used to aggregate
// spatial-edge hidden states.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "srnn/errors.hpp"
#include "srnn/text.hpp"

namespace srnn {

struct SpatialEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const SpatialEdge&, const SpatialEdge&) = default;
};

/// Per node: ascending indices of spatial edges with that node as an endpoint.
using IncidenceMap = std::vector<std::vector<std::size_t>>;

class RoadGraph {
 public:
  RoadGraph() = default;

  /// Builds the graph from a square 0/1 adjacency. Diagonal entries are
  /// dropped (the self relation is the temporal edge); a warning is written
  /// to `warnings` if given.
  static RoadGraph build(std::vector<std::string> segment_ids,
                         const std::vector<std::vector<int>>& adjacency,
                         std::ostream* warnings = nullptr) {
    const std::size_t n = segment_ids.size();
    if (adjacency.size() != n) {
      throw ParseError("adjacency has " + std::to_string(adjacency.size()) + " rows for " +
                       std::to_string(n) + " segment ids");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      if (!index.emplace(segment_ids[i], i).second) {
        throw ValidationError("duplicate segment id '" + segment_ids[i] + "'");
      }
    }
    RoadGraph g;
    g.ids_ = std::move(segment_ids);
    g.index_ = std::move(index);
    g.adjacency_.assign(n, std::vector<std::uint8_t>(n, 0));
    for (std::size_t r = 0; r < n; ++r) {
      if (adjacency[r].size() != n) {
        throw ParseError("adjacency row " + std::to_string(r) + " has " +
                         std::to_string(adjacency[r].size()) + " columns, expected " +
                         std::to_string(n));
      }
      for (std::size_t c = 0; c < n; ++c) {
        const int v = adjacency[r][c];
        if (v != 0 && v != 1) {
          throw ParseError("adjacency entry at row " + std::to_string(r) + ", col " +
                           std::to_string(c) + " is " + std::to_string(v) + ", expected 0 or 1");
        }
        if (v == 1 && r == c) {
          if (warnings != nullptr) {
            *warnings << "warning: ignoring self-loop on segment '" << g.ids_[r] << "'\n";
          }
          continue;
        }
        g.adjacency_[r][c] = static_cast<std::uint8_t>(v);
      }
    }
    g.enumerate_edges();
    return g;
  }

  std::size_t node_count() const { return ids_.size(); }
  std::size_t spatial_edge_count() const { return edges_.size(); }
  std::size_t temporal_edge_count() const { return ids_.size(); }

  const std::vector<std::string>& segment_ids() const { return ids_; }
  const std::vector<SpatialEdge>& spatial_edges() const { return edges_; }
  const IncidenceMap& incidence() const { return incidence_; }
  bool adjacent(std::size_t from, std::size_t to) const { return adjacency_.at(from).at(to) != 0; }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw LookupError("unknown segment id '" + id + "'");
    }
    return it->second;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> a(node_count(), std::vector<int>(node_count(), 0));
    for (std::size_t r = 0; r < node_count(); ++r)
      for (std::size_t c = 0; c < node_count(); ++c) a[r][c] = adjacency_[r][c];
    return a;
  }

  friend bool operator==(const RoadGraph& a, const RoadGraph& b) {
    return a.ids_ == b.ids_ && a.adjacency_ == b.adjacency_ && a.edges_ == b.edges_ &&
           a.incidence_ == b.incidence_;
  }

 private:
  // Row-major scan of the adjacency: edges ascend by (from, to).
  void enumerate_edges() {
    edges_.clear();
    incidence_.assign(node_count(), {});
    for (std::size_t r = 0; r < node_count(); ++r) {
      for (std::size_t c = 0; c < node_count(); ++c) {
        if (adjacency_[r][c] != 0) {
          const std::size_t e = edges_.size();
          edges_.push_back({r, c});
          incidence_[r].push_back(e);
          incidence_[c].push_back(e);
        }
      }
    }
    for (auto& list : incidence_) std::sort(list.begin(), list.end());
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::uint8_t>> adjacency_;
  std::vector<SpatialEdge> edges_;
  IncidenceMap incidence_;
};

/// Induced subgraph over `keep`, in the order given.
inline RoadGraph extract_subnetwork(const RoadGraph& g, const std::vector<std::string>& keep) {
  std::vector<std::size_t> rows;
  rows.reserve(keep.size());
  for (const auto& id : keep) rows.push_back(g.index_of(id));
  std::vector<std::vector<int>> a(keep.size(), std::vector<int>(keep.size(), 0));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.size(); ++c) a[r][c] = g.adjacent(rows[r], rows[c]) ? 1 : 0;
  return RoadGraph::build(keep, a);
}

/// Disjoint union with block-diagonal adjacency.
inline RoadGraph graph_union(const std::vector<RoadGraph>& graphs) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& g : graphs) {
    for (const auto& id : g.segment_ids()) {
      if (!seen.insert(id).second) {
        throw ValidationError("graph union: segment id '" + id + "' appears in more than one graph");
      }
      ids.push_back(id);
    }
  }
  std::vector<std::vector<int>> a(ids.size(), std::vector<int>(ids.size(), 0));
  std::size_t offset = 0;
  for (const auto& g : graphs) {
    for (const auto& e : g.spatial_edges()) a[offset + e.from][offset + e.to] = 1;
    offset += g.node_count();
  }
  return RoadGraph::build(std::move(ids), a);
}

// Adjacency CSV: header row "<corner>,id1,id2,...", then one row per segment
// "idK,a_K1,a_K2,...". Entry (i,j)=1 means traffic flows from segment i to j.
inline RoadGraph parse_adjacency_csv(std::istream& in, std::ostream* warnings = nullptr) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("adjacency: empty file");
  }
  auto header = text::split_csv(text::trim(line));
  if (header.size() < 2) {
    throw ParseError("adjacency: header must list at least one segment id");
  }
  std::vector<std::string> ids(header.begin() + 1, header.end());
  std::vector<std::vector<int>> a;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = text::trim(line);
    if (line.empty()) continue;
    auto cells = text::split_csv(line);
    if (row >= ids.size()) {
      throw ParseError("adjacency: more rows than segment ids (row " + std::to_string(row) + ")");
    }
    if (cells.size() != ids.size() + 1) {
      throw ParseError("adjacency: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size() - 1) + " entries, expected " +
                       std::to_string(ids.size()));
    }
    if (cells[0] != ids[row]) {
      throw ParseError("adjacency: row " + std::to_string(row) + " labelled '" + cells[0] +
                       "' but column order expects '" + ids[row] + "'");
    }
    std::vector<int> r;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      if (cell != "0" && cell != "1") {
        throw ParseError("adjacency: entry at row " + std::to_string(row) + ", col " +
                         std::to_string(c - 1) + " is '" + cell + "', expected 0 or 1");
      }
      r.push_back(cell == "1" ? 1 : 0);
    }
    a.push_back(std::move(r));
    ++row;
  }
  if (a.size() != ids.size()) {
    throw ParseError("adjacency: " + std::to_string(a.size()) + " rows for " +
                     std::to_string(ids.size()) + " columns (matrix not square)");
  }
  return RoadGraph::build(std::move(ids), a, warnings);
}

inline RoadGraph load_adjacency(const std::string& path, std::ostream* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open adjacency file '" + path + "'");
  return parse_adjacency_csv(in, warnings);
}

inline void write_adjacency_csv(std::ostream& out, const RoadGraph& g) {
  out << "segment";
  for (const auto& id : g.segment_ids()) out << ',' << id;
  out << '\n';
  const auto a = g.adjacency();
  for (std::size_t r = 0; r < g.node_count(); ++r) {
    out << g.segment_ids()[r];
    for (int v : a[r]) out << ',' << v;
    out << '\n';
  }
}

inline void save_adjacency(const std::string& path, const RoadGraph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write adjacency file '" + path + "'");
  write_adjacency_csv(out, g);
}

/// Directed ring 0->1->...->N-1->0 plus one chord 0->N/2. For N < 4 the chord
/// would duplicate a ring edge and is skipped.
inline RoadGraph ring_with_chord(std::size_t n, const std::string& prefix = "s") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  if (n >= 2) {
    for (std::size_t i = 0; i < n; ++i) a[i][(i + 1) % n] = 1;
  }
  if (n >= 4) a[0][n / 2] = 1;
  return RoadGraph::build(std::move(ids), a);
}

}  // namespace srnn
