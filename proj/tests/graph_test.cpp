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

#include <random>
#include <sstream>

#include "srnn/graph.hpp"

namespace srnn {
namespace {

RoadGraph chain(std::vector<std::string> ids) {
  const std::size_t n = ids.size();
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i + 1 < n; ++i) a[i][i + 1] = 1;
  return RoadGraph::build(std::move(ids), a);
}

RoadGraph random_graph(std::size_t n, std::mt19937_64& rng, const std::string& prefix = "n") {
  std::bernoulli_distribution edge(0.3);
  std::vector<std::string> ids;
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(prefix + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) a[i][j] = (i != j && edge(rng)) ? 1 : 0;
  }
  return RoadGraph::build(ids, a);
}

TEST(BuildGraph, SingleEdge) {
  auto g = RoadGraph::build({"a", "b"}, {{0, 1}, {0, 0}});
  ASSERT_EQ(g.spatial_edge_count(), 1u);
  EXPECT_EQ(g.spatial_edges()[0], (SpatialEdge{0, 1}));
  EXPECT_EQ(g.incidence()[0], std::vector<std::size_t>{0});
  EXPECT_EQ(g.incidence()[1], std::vector<std::size_t>{0});
  EXPECT_EQ(g.temporal_edge_count(), 2u);
}

TEST(BuildGraph, DisconnectedGraphAllowed) {
  auto g = RoadGraph::build({"a", "b", "c"}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  EXPECT_EQ(g.spatial_edge_count(), 0u);
  for (const auto& c : g.incidence()) EXPECT_TRUE(c.empty());
}

TEST(BuildGraph, NineSegmentSubset) {
  std::vector<std::string> ids;
  for (int i = 0; i < 9; ++i) ids.push_back("r3_" + std::to_string(i));
  EXPECT_EQ(chain(ids).node_count(), 9u);
}

TEST(BuildGraph, Errors) {
  EXPECT_THROW(RoadGraph::build({"a", "b"}, {{0, 1}}), ParseError);
  EXPECT_THROW(RoadGraph::build({"a", "b"}, {{0, 1}, {0}}), ParseError);
  EXPECT_THROW(RoadGraph::build({"a", "b"}, {{0, 2}, {0, 0}}), ParseError);
  EXPECT_THROW(RoadGraph::build({"a", "a"}, {{0, 1}, {0, 0}}), ValidationError);
}

TEST(BuildGraph, SelfLoopsIgnoredWithWarning) {
  std::ostringstream warn;
  auto g = RoadGraph::build({"a", "b"}, {{1, 1}, {0, 0}}, &warn);
  EXPECT_EQ(g.spatial_edge_count(), 1u);
  EXPECT_NE(warn.str().find("self-loop"), std::string::npos);
}

TEST(BuildGraph, BidirectionalPairGivesTwoEdges) {
  auto g = RoadGraph::build({"a", "b"}, {{0, 1}, {1, 0}});
  ASSERT_EQ(g.spatial_edge_count(), 2u);
  EXPECT_EQ(g.spatial_edges()[0], (SpatialEdge{0, 1}));
  EXPECT_EQ(g.spatial_edges()[1], (SpatialEdge{1, 0}));
  EXPECT_EQ(g.incidence()[0], (std::vector<std::size_t>{0, 1}));
}

TEST(Subnetwork, KeepAllIsIdentity) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_graph(7, rng);
    EXPECT_EQ(extract_subnetwork(g, g.segment_ids()), g);
  }
}

TEST(Subnetwork, RemovingMiddleSeversChain) {
  auto g = chain({"a", "b", "c"});
  auto sub = extract_subnetwork(g, {"a", "c"});
  EXPECT_EQ(sub.node_count(), 2u);
  EXPECT_EQ(sub.spatial_edge_count(), 0u);
}

TEST(Subnetwork, UnknownIdNamed) {
  auto g = chain({"a", "b"});
  try {
    extract_subnetwork(g, {"a", "zz"});
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(Union, BlockDiagonal) {
  auto r1 = ring_with_chord(5, "r1_");
  auto r2 = ring_with_chord(5, "r2_");
  auto r3 = ring_with_chord(9, "r3_");
  auto r4 = graph_union({r1, r2, r3});
  EXPECT_EQ(r4.node_count(), 19u);
  EXPECT_EQ(r4.spatial_edge_count(), r1.spatial_edge_count() + r2.spatial_edge_count() + r3.spatial_edge_count());
  EXPECT_EQ(extract_subnetwork(r4, r3.segment_ids()), r3);
  EXPECT_EQ(graph_union({r1}), r1);

  auto single_a = RoadGraph::build({"x"}, {{0}});
  auto single_b = RoadGraph::build({"y"}, {{0}});
  auto two = graph_union({single_a, single_b});
  EXPECT_EQ(two.node_count(), 2u);
  EXPECT_EQ(two.spatial_edge_count(), 0u);
  EXPECT_THROW(graph_union({r1, r1}), ValidationError);
}

TEST(Properties, IncidenceIsExactAndDegreeSumIsTwiceEdges) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(1 + trial % 9, rng);
    std::size_t total = 0;
    for (std::size_t u = 0; u < g.node_count(); ++u) {
      const auto& c = g.incidence()[u];
      EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
      total += c.size();
      for (std::size_t e = 0; e < g.spatial_edge_count(); ++e) {
        const bool touches = g.spatial_edges()[e].from == u || g.spatial_edges()[e].to == u;
        EXPECT_EQ(touches, std::find(c.begin(), c.end(), e) != c.end());
      }
    }
    EXPECT_EQ(total, 2 * g.spatial_edge_count());
    for (std::size_t e = 1; e < g.spatial_edge_count(); ++e) {
      const auto& p = g.spatial_edges()[e - 1];
      const auto& q = g.spatial_edges()[e];
      EXPECT_TRUE(std::pair(p.from, p.to) < std::pair(q.from, q.to));
    }
  }
}

TEST(AdjacencyCsv, ParseTwiceGivesIdenticalGraphs) {
  const std::string csv = "segment,10,11,12\n10,0,1,0\n11,0,0,1\n12,1,0,0\n";
  std::istringstream a(csv), b(csv);
  auto g1 = parse_adjacency_csv(a);
  auto g2 = parse_adjacency_csv(b);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(g1.spatial_edge_count(), 3u);
  std::ostringstream out;
  write_adjacency_csv(out, g1);
  EXPECT_EQ(out.str(), csv);
}

TEST(AdjacencyCsv, Errors) {
  std::istringstream non_binary("s,a,b\na,0,3\nb,0,0\n");
  try {
    parse_adjacency_csv(non_binary);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 0, col 1"), std::string::npos);
  }
  std::istringstream short_rows("s,a,b\na,0,1\n");
  EXPECT_THROW(parse_adjacency_csv(short_rows), ParseError);
  std::istringstream wide("s,a,b\na,0,1,1\nb,0,0\n");
  EXPECT_THROW(parse_adjacency_csv(wide), ParseError);
}

}  // namespace
}  // namespace srnn
