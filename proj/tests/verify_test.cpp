#include <gtest/gtest.h>

#include "oracles.hpp"
#include "treepack/generators.hpp"
#include "treepack/paths.hpp"
#include "treepack/verify.hpp"

namespace treepack {
namespace {

Graph cycle(int n) {
  Graph g(n);
  for (int v = 0; v < n; ++v) g.add_edge(v, (v + 1) % n);
  return g;
}

PackingState one_tree_state(int host_n, const RootedTree& t, const VertexSet& map) {
  PackingState st(host_n, {t});
  st.trees[0].map = map;
  st.trees[0].packed = true;
  return st;
}

TEST(CheckPacking, EmptyState) {
  Graph g = cycle(6);
  PackingState st(6, {});
  auto rep = check_packing(g, Graph(6), st);
  EXPECT_TRUE(rep.edge_disjoint);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.coverage, 0.0);
  EXPECT_EQ(rep.used_edges, 0);
}

TEST(CheckPacking, PathAlongCycle) {
  Graph g = cycle(6);
  auto st = one_tree_state(6, path_tree(4), {2, 3, 4, 5});
  auto rep = check_packing(g, Graph(6), st);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.used_edges, 3);
  EXPECT_DOUBLE_EQ(rep.coverage, 3.0 / 6.0);
  ASSERT_EQ(rep.per_tree_status.size(), 1u);
  EXPECT_TRUE(rep.per_tree_status[0].valid);
  EXPECT_EQ(rep.per_tree_status[0].edges, 3);
}

TEST(CheckPacking, DuplicatedEdgeIsListed) {
  Graph g = cycle(6);
  PackingState st(6, {path_tree(3), path_tree(2)});
  st.trees[0].map = {0, 1, 2};
  st.trees[1].map = {2, 1};
  st.trees[0].packed = st.trees[1].packed = true;
  auto rep = check_packing(g, Graph(6), st);
  EXPECT_FALSE(rep.edge_disjoint);
  ASSERT_EQ(rep.duplicated.size(), 1u);
  EXPECT_EQ(rep.duplicated[0].a, 1);
  EXPECT_EQ(rep.duplicated[0].b, 2);
  EXPECT_EQ(rep.duplicated[0].trees, (std::vector<int>{0, 1}));
  EXPECT_EQ(rep.to_json()["duplicated_edges"][0]["edge"], nlohmann::json({1, 2}));
}

TEST(CheckPacking, NonEdgeAndNonInjectiveMapsAreInvalid) {
  Graph g = cycle(6);
  auto st = one_tree_state(6, path_tree(3), {0, 2, 3});
  auto rep = check_packing(g, Graph(6), st);
  EXPECT_FALSE(rep.ok());
  EXPECT_FALSE(rep.per_tree_status[0].valid);

  auto st2 = one_tree_state(6, path_tree(3), {0, 1, 0});
  auto rep2 = check_packing(g, Graph(6), st2);
  EXPECT_FALSE(rep2.ok());

  auto st3 = one_tree_state(6, path_tree(3), {0, 1, -1});
  EXPECT_FALSE(check_packing(g, Graph(6), st3).ok());
}

TEST(CheckPacking, UnpackedTreesAreIgnored) {
  Graph g = cycle(6);
  PackingState st(6, {path_tree(3)});
  st.trees[0].map = {0, 3, 5};
  auto rep = check_packing(g, Graph(6), st);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.used_edges, 0);
}

TEST(CheckPacking, HubEdgesCountAndHubDegreeIsMeasured) {
  // g: path 0-1-2; hub: star at 3 touching 0, 1, 2.
  Graph g(4), hub(4);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  for (int v = 0; v < 3; ++v) hub.add_edge(3, v);
  RootedTree star({-1, 0, 0, 0}, 0);
  auto st = one_tree_state(4, star, {3, 0, 1, 2});
  auto rep = check_packing(g, hub, st);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.hub_usage_max, 3);
  EXPECT_EQ(rep.used_edges, 3);
  EXPECT_DOUBLE_EQ(rep.coverage, 1.0);  // clipped: 3 image edges over e(g) = 2

  st.hub_sets = {{0}};
  EXPECT_EQ(check_packing(g, hub, st).hub_usage_max, 1);
}

TEST(CheckPacking, PureFunction) {
  Graph g = erdos_renyi(30, 0.3, 4);
  auto path = find_spanning_path(g, 1);
  ASSERT_TRUE(path.has_value());
  auto st = one_tree_state(30, path_tree(30), *path);
  auto a = check_packing(g, Graph(30), st).to_json().dump();
  auto b = check_packing(g, Graph(30), st).to_json().dump();
  EXPECT_EQ(a, b);
  EXPECT_TRUE(check_packing(g, Graph(30), st).ok());
}

TEST(PathIntraPart, SpecExamples) {
  Graph host = unbalanced_noisy_bipartite(12, 1.0 / 3.0, 3);
  auto [a, b] = unbalanced_parts(12, 1.0 / 3.0);
  VertexSet big = iota_set(b, a);
  // Short path alternating across the parts.
  EXPECT_EQ(path_intra_part_count(host, big, {0, a, 1, a + 1}), 0);

  Graph inside = complete(12);
  VertexSet only_big(big.begin(), big.end());
  EXPECT_EQ(path_intra_part_count(inside, big, only_big), b - 1);
}

TEST(PathIntraPart, ExhaustiveSpanningPathsOnShrunkInstance) {
  double xi = 1.0 / 3.0;
  int n = 12;
  int hosts_with_paths = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Graph host = unbalanced_noisy_bipartite(n, xi, seed);
    auto [a, b] = unbalanced_parts(n, xi);
    VertexSet big = iota_set(b, a);
    long long paths = 0;
    int worst = n;
    oracle::for_each_spanning_path(host, [&](const std::vector<int>& p) {
      ++paths;
      worst = std::min(worst, path_intra_part_count(host, big, p));
    });
    if (paths > 0) {
      ++hosts_with_paths;
      EXPECT_GE(worst, xi * n - 2);
    }
  }
  EXPECT_GT(hosts_with_paths, 0);
}

TEST(PathIntraPart, InvalidEmbeddingThrows) {
  Graph host(4);
  host.add_edge(0, 1);
  EXPECT_THROW(path_intra_part_count(host, {2, 3}, {0, 2}), AuditError);
  EXPECT_THROW(path_intra_part_count(host, {2, 3}, {0, 1, 0}), AuditError);
}

TEST(TernaryNoncrossing, HandCheckedThirteenVertices) {
  Graph t = ternary_tree(2);
  VertexSet id = iota_set(13);
  // Host complete on 13 vertices, parts {0..6} and {7..12}. Edges 1,2,3-0 and
  // 4,5,6-1 stay inside the first part; 7,8,9-2 and 10,11,12-3 cross.
  EXPECT_EQ(ternary_noncrossing_count(complete(13), iota_set(7), t, id), 6);
}

TEST(TernaryNoncrossing, AllCrossingAndSinglePart) {
  Graph t = ternary_tree(2);
  // Even BFS layers (root and leaves) on one side of K_{10,3}.
  VertexSet map(13);
  int even = 0, odd = 10;
  for (int v = 0; v < 13; ++v) map[v] = (v == 0 || v >= 4) ? even++ : odd++;
  EXPECT_EQ(ternary_noncrossing_count(complete_bipartite(10, 3), iota_set(10), t, map), 0);

  EXPECT_EQ(ternary_noncrossing_count(complete(13), iota_set(13), t, iota_set(13)), 12);
  EXPECT_THROW(ternary_noncrossing_count(complete_bipartite(7, 6), iota_set(7), t, iota_set(13)), AuditError);
}

}  // namespace
}  // namespace treepack
