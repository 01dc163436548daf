#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "treepack/generators.hpp"
#include "treepack/regularity.hpp"

namespace treepack {
namespace {

Graph random_bipartite(int a, int b, double p, std::uint64_t seed) {
  Graph g(a + b);
  Rng rng = make_rng(seed);
  add_random_bipartite_edges(g, iota_set(a), iota_set(b, a), p, rng);
  return g;
}

TEST(Density, SpecExamples) {
  Graph k = complete_bipartite(4, 5);
  EXPECT_DOUBLE_EQ(density({k, iota_set(4), iota_set(5, 4)}).value(), 1.0);
  Graph e(9);
  EXPECT_DOUBLE_EQ(density({e, iota_set(4), iota_set(5, 4)}).value(), 0.0);
  Graph c4(4);  // cycle 0-2-1-3-0, bipartition {0,1} {2,3}
  c4.add_edge(0, 2);
  c4.add_edge(2, 1);
  c4.add_edge(1, 3);
  c4.add_edge(3, 0);
  auto d = density({c4, {0, 1}, {2, 3}});
  EXPECT_EQ(d.edges, 4);
  EXPECT_DOUBLE_EQ(d.value(), 1.0);
  EXPECT_THROW(density({k, {}, iota_set(5, 4)}), ParameterError);
}

TEST(Density, OverlappingSidesRejected) {
  Graph k = complete(4);
  EXPECT_THROW(BipartitePairView(k, {0, 1}, {1, 2}), ParameterError);
}

TEST(RegularityTest, SpecExamples) {
  Graph k = complete_bipartite(6, 6);
  auto v = regularity_test({k, iota_set(6), iota_set(6, 6)}, 0.3, RegularityMode::exact());
  EXPECT_EQ(v.status, RegularityStatus::regular);
  EXPECT_DOUBLE_EQ(v.density, 1.0);

  Graph m(16);
  for (int i = 0; i < 8; ++i) m.add_edge(i, 8 + i);
  auto w = regularity_test({m, iota_set(8), iota_set(8, 8)}, 0.25, RegularityMode::exact());
  ASSERT_EQ(w.status, RegularityStatus::irregular);
  ASSERT_TRUE(w.witness);
  auto [wa, wb] = *w.witness;
  EXPECT_GE(wa.size(), 2u);
  EXPECT_GE(wb.size(), 2u);
  double dd = static_cast<double>(edges_between(m, wa, wb)) / (wa.size() * wb.size());
  EXPECT_GE(std::abs(dd - 0.125), 0.25);

  Graph g = random_bipartite(100, 100, 0.5, 1);
  auto s = regularity_test({g, iota_set(100), iota_set(100, 100)}, 0.1, RegularityMode::sampled(500, 3));
  EXPECT_EQ(s.status, RegularityStatus::estimated_regular);
  EXPECT_NEAR(s.density, 0.5, 0.05);
  auto s2 = regularity_test({g, iota_set(100), iota_set(100, 100)}, 0.1, RegularityMode::sampled(500, 4));
  EXPECT_EQ(s2.status, RegularityStatus::estimated_regular);
}

TEST(RegularityTest, ExhaustiveRejectsLargeSides) {
  Graph k = complete_bipartite(17, 2);
  EXPECT_THROW(regularity_test({k, iota_set(17), iota_set(2, 17)}, 0.2, RegularityMode::exact()), SizeError);
}

TEST(RegularityTest, ExhaustiveAgreesWithFullEnumeration) {
  Rng rng = make_rng(2024);
  for (int inst = 0; inst < 150; ++inst) {
    int a = static_cast<int>(uniform_int(rng, 1, 5)), b = static_cast<int>(uniform_int(rng, 1, 5));
    double p = uniform01(rng);
    double eps = 0.15 + 0.5 * uniform01(rng);
    Graph g = random_bipartite(a, b, p, static_cast<std::uint64_t>(inst));
    VertexSet A = iota_set(a), B = iota_set(b, a);
    auto v = regularity_test({g, A, B}, eps, RegularityMode::exact());
    EXPECT_EQ(v.status == RegularityStatus::regular, oracle::is_regular(g, A, B, eps)) << "instance " << inst;
    if (v.witness) {
      auto [wa, wb] = *v.witness;
      EXPECT_GE(static_cast<double>(wa.size()), eps * a - 1e-9);
      EXPECT_GE(static_cast<double>(wb.size()), eps * b - 1e-9);
    }
  }
}

TEST(RobustDegreeFilter, SpecExamples) {
  Graph k = complete_bipartite(10, 10);
  BipartitePairView kp(k, iota_set(10), iota_set(10, 10));
  EXPECT_EQ(robust_degree_filter(kp, 0.1, 0.9, iota_set(6, 10)), iota_set(10));
  Graph e(20);
  EXPECT_TRUE(robust_degree_filter({e, iota_set(10), iota_set(10, 10)}, 0.1, 0.5, iota_set(6, 10)).empty());

  Graph g = random_bipartite(200, 200, 0.5, 8);
  BipartitePairView gp(g, iota_set(200), iota_set(200, 200));
  Rng rng = make_rng(5);
  VertexSet bsub = sample_without_replacement(gp.side_b, 80, rng);
  auto keep = robust_degree_filter(gp, 0.05, 0.45, bsub);
  EXPECT_GE(keep.size(), static_cast<std::size_t>(0.97 * 200));
  // Naive recount.
  double thr = (0.45 - std::sqrt(0.05)) * 80;
  VertexSet expect;
  for (Vertex u = 0; u < 200; ++u) {
    int c = 0;
    for (Vertex b : bsub) c += g.has_edge(u, b);
    if (c >= thr) expect.push_back(u);
  }
  EXPECT_EQ(keep, expect);
}

TEST(RobustDegreeFilter, SmallSubsetRejected) {
  Graph k = complete_bipartite(10, 10);
  EXPECT_THROW(robust_degree_filter({k, iota_set(10), iota_set(10, 10)}, 0.5, 0.5, {10, 11}), ParameterError);
}

TEST(SuperRegularTrim, SpecExamples) {
  Graph k = complete_bipartite(12, 12);
  auto t = super_regular_trim({k, iota_set(12), iota_set(12, 12)}, 0.1, 1.0);
  EXPECT_EQ(t.side_a.size(), 12u);
  EXPECT_EQ(t.side_b.size(), 12u);
  EXPECT_TRUE(t.degrees_within);

  Graph g = random_bipartite(150, 150, 0.5, 12);
  auto r = super_regular_trim({g, iota_set(150), iota_set(150, 150)}, 0.1, 0.45);
  EXPECT_LE(r.removed_a, 30);
  EXPECT_LE(r.removed_b, 30);
  EXPECT_TRUE(super_regular_degrees(g, r.side_a, r.side_b, 0.45, 0.3));

  // Adjoin an isolated vertex (index 300) to side A.
  Graph h(301);
  for (auto [u, v] : g.edges()) h.add_edge(u, v);
  VertexSet A = iota_set(150);
  A.push_back(300);
  auto q = super_regular_trim({h, A, iota_set(150, 150)}, 0.1, 0.45);
  EXPECT_EQ(std::count(q.side_a.begin(), q.side_a.end(), 300), 0);
  EXPECT_EQ(q.removed_a, 1 + r.removed_a);
}

TEST(SuperRegularTrim, IrregularInputReported) {
  Graph e(40);
  EXPECT_THROW(super_regular_trim({e, iota_set(20), iota_set(20, 20)}, 0.1, 0.5), RegularityViolation);
}

TEST(SplitEdges, SpecExamples) {
  Graph k = complete_bipartite(10, 10);
  BipartitePairView p(k, iota_set(10), iota_set(10, 10));
  auto one = split_edges(p, {1.0}, 1);
  EXPECT_EQ(one.classes[0].size(), 100u);
  EXPECT_TRUE(one.leftover.empty());
  auto zero = split_edges(p, {0.0, 0.0}, 1);
  EXPECT_TRUE(zero.classes[0].empty());
  EXPECT_TRUE(zero.classes[1].empty());
  EXPECT_EQ(zero.leftover.size(), 100u);
  EXPECT_THROW(split_edges(p, {0.6, 0.5}, 1), ParameterError);

  Graph big = complete_bipartite(100, 100);
  auto half = split_edges({big, iota_set(100), iota_set(100, 100)}, {0.5, 0.5}, 3);
  EXPECT_NEAR(static_cast<double>(half.classes[0].size()), 5000.0, 300.0);
  EXPECT_NEAR(static_cast<double>(half.classes[1].size()), 5000.0, 300.0);
}

TEST(SplitEdges, ClassesPartitionCrossingEdges) {
  Graph g = random_bipartite(40, 30, 0.4, 2);
  BipartitePairView p(g, iota_set(40), iota_set(30, 40));
  auto sp = split_edges(p, {0.2, 0.3, 0.1}, 9);
  std::set<Edge> seen;
  std::size_t total = sp.leftover.size();
  for (const auto& c : sp.classes) total += c.size();
  for (const auto& c : sp.classes)
    for (auto e : c) {
      EXPECT_TRUE(g.has_edge(e.first, e.second));
      EXPECT_TRUE(seen.insert(e).second);
    }
  for (auto e : sp.leftover) EXPECT_TRUE(seen.insert(e).second);
  EXPECT_EQ(static_cast<long long>(total), edges_between(g, p.side_a, p.side_b));
}

TEST(PartitionSuperRegular, SpecExamples) {
  Graph k = complete_bipartite(20, 20);
  auto s = partition_super_regular({k, iota_set(20), iota_set(20, 20)}, 0.1, 1.0, 10, 10, 12, 8, 1);
  EXPECT_EQ(s.attempts, 1);
  EXPECT_EQ(s.a1.size(), 10u);
  EXPECT_EQ(s.b2.size(), 8u);
  EXPECT_THROW(partition_super_regular({k, iota_set(20), iota_set(20, 20)}, 0.1, 1.0, 0, 20, 10, 10, 1),
               ParameterError);

  Graph g = random_bipartite(200, 200, 0.5, 21);
  auto q = partition_super_regular({g, iota_set(200), iota_set(200, 200)}, 0.04, 0.5, 100, 100, 100, 100, 2);
  for (auto* a : {&q.a1, &q.a2})
    for (auto* b : {&q.b1, &q.b2}) {
      double d = static_cast<double>(edges_between(g, *a, *b)) / (a->size() * b->size());
      EXPECT_NEAR(d, 0.5, 0.2);
    }
}

TEST(RemoveEdgesCheck, SpecExamples) {
  Graph k = complete_bipartite(50, 50);
  BipartitePairView p(k, iota_set(50), iota_set(50, 50));
  auto base = regularity_test(p, std::sqrt(0.3), RegularityMode::sampled(200, 1));
  auto same = remove_edges_check(p, 0.3, 1.0, {}, RegularityMode::sampled(200, 1));
  EXPECT_EQ(same.status, base.status);
  // 0.3^10 * 2500 ~ 0.015 < 1: one removed edge exceeds the budget here.
  EXPECT_THROW(remove_edges_check(p, 0.3, 1.0, {{0, 50}}, RegularityMode::sampled(10, 1)), ParameterError);

  // With eps = 0.6 the budget is 0.6^10 * 100 ~ 0.6 on 10+10; use 16+16 sides
  // and eps = 0.7 (budget ~ 7.2) to remove a single edge exhaustively.
  Graph k16 = complete_bipartite(16, 16);
  BipartitePairView p16(k16, iota_set(16), iota_set(16, 16));
  auto v = remove_edges_check(p16, 0.7, 1.0, {{0, 16}}, RegularityMode::exact());
  EXPECT_EQ(v.status, RegularityStatus::regular);
  EXPECT_NEAR(v.epsilon, std::sqrt(0.7), 1e-12);
}

TEST(RegularPartitionHeuristic, SpecExamples) {
  Graph g = erdos_renyi(600, 0.5, 4);
  auto rp = regular_partition_heuristic(g, 4, 0.1, 1);
  ASSERT_EQ(rp.parts.size(), 4u);
  for (const auto& p : rp.parts) EXPECT_EQ(p.size(), 150u);
  EXPECT_EQ(rp.pairs.size(), 6u);
  for (const auto& pr : rp.pairs) {
    EXPECT_TRUE(pr.verdict.ok());
    EXPECT_NEAR(pr.density, 0.5, 0.05);
  }

  Graph kb = complete_bipartite(100, 100);
  auto kp = regular_partition_heuristic(kb, 2, 0.1, 3);
  ASSERT_EQ(kp.parts.size(), 2u);
  EXPECT_EQ(kp.internal_edges, 0);
  EXPECT_DOUBLE_EQ(kp.pairs[0].density, 1.0);
  bool first_low = kp.parts[0].front() < 100;
  for (Vertex v : kp.parts[0]) EXPECT_EQ(v < 100, first_low);

  auto one = regular_partition_heuristic(Graph(1), 2, 0.1, 1);
  EXPECT_EQ(one.parts.size(), 1u);
  EXPECT_TRUE(one.exceptional.empty());
}

}  // namespace
}  // namespace treepack
