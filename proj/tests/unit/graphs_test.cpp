#include <gtest/gtest.h>

#include <set>

#include "cgnn/causal.hpp"
#include "cgnn/graphs.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace cgnn {
namespace {

TEST(EntityGraph, SymmetricAndAsymmetricOverlaps) {
  {
    const WeightedDigraph g = BuildEntityGraph({{1, 2}, {2, 3}});
    EXPECT_DOUBLE_EQ(g.weight(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(g.weight(1, 0), 0.5);
  }
  {
    const WeightedDigraph g = BuildEntityGraph({{1}, {1, 2, 3}});
    EXPECT_DOUBLE_EQ(g.weight(0, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(g.weight(1, 0), 1.0);
  }
}

TEST(EntityGraph, MatchesSetIntersectionOracleExactly) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const std::size_t n = seed == 4 ? 200 : 50;
    const auto exposures = testing::RandomExposures(n, 30, 0.15, seed);
    std::size_t excluded = 0;
    const WeightedDigraph g = BuildEntityGraph(exposures, {0}, &excluded);
    const Tensor oracle = testing::EntityGraphOracle(exposures);
    std::size_t empty = 0;
    for (const auto& e : exposures) empty += e.empty();
    EXPECT_EQ(excluded, empty);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(g.weight(i, i), 0.0);
      for (std::size_t j = 0; j < n; ++j) ASSERT_EQ(g.weight(i, j), oracle.at(i, j)) << i << "->" << j;
    }
  }
}

TEST(EntityGraph, WeightsInUnitIntervalAndNoSelfLoops) {
  const WeightedDigraph g = BuildEntityGraph(testing::RandomExposures(60, 20, 0.3, 8));
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    for (const Edge& e : g.out(i)) {
      EXPECT_NE(e.to, i);
      EXPECT_GT(e.weight, 0.0);
      EXPECT_LE(e.weight, 1.0);
    }
  }
}

TEST(EntityGraph, InDegreeCapKeepsStrongestEdges) {
  const auto exposures = testing::RandomExposures(80, 20, 0.3, 2);
  const WeightedDigraph full = BuildEntityGraph(exposures, {0});
  const WeightedDigraph capped = BuildEntityGraph(exposures, {5});
  const NeighborMask fm = Prune(full, 0.0), cm = Prune(capped, 0.0);
  for (std::size_t i = 0; i < 80; ++i) {
    EXPECT_LE(cm.in[i].size(), 5u);
    double weakest_kept = 2.0;
    for (double w : cm.in_weight[i]) weakest_kept = std::min(weakest_kept, w);
    std::size_t stronger = 0;
    for (double w : fm.in_weight[i]) stronger += w > weakest_kept;
    EXPECT_LE(stronger, cm.in[i].size());
  }
}

TEST(EntityGraph, EdgeListRoundTrip) {
  const WeightedDigraph g = BuildEntityGraph(testing::RandomExposures(30, 10, 0.3, 5));
  const std::string path = testing::TempDir("graph_io") + "/g.txt";
  g.Save(path);
  EXPECT_TRUE(WeightedDigraph::Load(path) == g);
}

TEST(Prune, StrictThreshold) {
  WeightedDigraph g(4);
  g.SetEdge(0, 3, 0.2);
  g.SetEdge(1, 3, 0.5);
  g.SetEdge(2, 3, 0.9);
  EXPECT_EQ(Prune(g, 0.0).in[3].size(), 3u);
  const NeighborMask m = Prune(g, 0.5);
  EXPECT_EQ(m.in[3], (std::vector<std::uint32_t>{2}));
  WeightedDigraph edge(2);
  edge.SetEdge(0, 1, 0.99);
  EXPECT_TRUE(Prune(edge, 0.99).in[1].empty());
}

TEST(Prune, MonotoneInEpsilonAndSubsetOfGraph) {
  const WeightedDigraph g = BuildEntityGraph(testing::RandomExposures(60, 25, 0.2, 6));
  NeighborMask previous = Prune(g, 0.0);
  for (double eps = 0.05; eps < 1.0; eps += 0.05) {
    const NeighborMask m = Prune(g, eps);
    for (std::size_t i = 0; i < 60; ++i) {
      for (std::size_t j = 0; j < m.in[i].size(); ++j) {
        EXPECT_TRUE(previous.Contains(m.in[i][j], i));
        EXPECT_GT(g.weight(m.in[i][j], i), eps);
      }
    }
    EXPECT_LE(m.num_edges(), previous.num_edges());
    previous = m;
  }
}

TEST(PruneMatrix, UsesMagnitudeAndDropsDiagonal) {
  const Tensor w = Tensor::Matrix({{5, -0.8, 0}, {0, 0, 0.1}, {0.4, 0, 0}});
  const NeighborMask m = PruneMatrix(w, 0.3);
  EXPECT_TRUE(m.in[0].size() == 1 && m.in[0][0] == 2);
  EXPECT_TRUE(m.in[1].size() == 1 && m.in[1][0] == 0);
  EXPECT_TRUE(m.in[2].empty());
}

TEST(CompleteMask, AllOrderedPairsWithoutSelfLoops) {
  const NeighborMask m = CompleteMask(5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m.in[i].size(), 4u);
    EXPECT_FALSE(m.Contains(i, i));
  }
}

TEST(SampleNeighbors, SmallDegreeReturnsAllAndIsDeterministic) {
  const NeighborMask m = CompleteMask(4);
  EXPECT_EQ(SampleNeighbors(m, 0, 5, 1).size(), 3u);
  const NeighborMask big = CompleteMask(30);
  EXPECT_EQ(SampleNeighbors(big, 3, 10, 42), SampleNeighbors(big, 3, 10, 42));
  const auto s = SampleNeighbors(big, 3, 10, 42);
  EXPECT_EQ(std::set<std::uint32_t>(s.begin(), s.end()).size(), 10u);
}

TEST(SampleNeighbors, FollowsWeightProportionalLaw) {
  WeightedDigraph g(3);
  g.SetEdge(0, 2, 0.99);
  g.SetEdge(1, 2, 0.01);
  const NeighborMask m = Prune(g, 0.0);
  std::size_t heavy = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) heavy += SampleNeighbors(m, 2, 1, seed)[0] == 0;
  EXPECT_GE(heavy, 9800u);
}

TEST(Cycles, FindCycleAgreesWithOracle) {
  for (std::uint32_t code = 0; code < 4096; code += 7) {
    Tensor a({4, 4});
    std::uint32_t bit = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        if (i != j) a.at(i, j) = (code >> bit++) & 1u;
      }
    }
    EXPECT_EQ(IsAcyclic(a), !testing::HasCycleOracle(a));
    const auto cycle = FindCycle(a);
    if (!cycle.empty()) {
      EXPECT_EQ(cycle.front(), cycle.back());
      for (std::size_t k = 0; k + 1 < cycle.size(); ++k) EXPECT_NE(a.at(cycle[k], cycle[k + 1]), 0.0);
    }
  }
}

}  // namespace
}  // namespace cgnn
