#include <map>
#include <set>

#include <gtest/gtest.h>

#include "treepack/generators.hpp"
#include "treepack/holes.hpp"
#include "treepack/packing.hpp"

namespace treepack {
namespace {

// Independent audit: injective maps, tree edges on host edges, no host edge twice.
struct Audit {
  bool ok = true;
  long long edges = 0;
  std::string why;
};

Audit audit(const Graph& host, const PackingState& st) {
  Audit a;
  std::set<Edge> seen;
  for (const auto& t : st.trees) {
    if (!t.packed) continue;
    std::set<int> imgs(t.map.begin(), t.map.end());
    if (imgs.size() != t.map.size() || imgs.count(-1)) {
      a.ok = false;
      a.why = "tree " + std::to_string(t.id) + " map not injective";
    }
    for (auto [u, v] : t.tree.edges()) {
      int hu = t.map[u], hv = t.map[v];
      if (hu < 0 || hv < 0 || !host.has_edge(hu, hv)) {
        a.ok = false;
        a.why = "tree " + std::to_string(t.id) + " edge off host";
        continue;
      }
      if (!seen.insert(make_edge(hu, hv)).second) {
        a.ok = false;
        a.why = "host edge reused";
      }
      ++a.edges;
    }
  }
  return a;
}

PipelineConfig planted_config() {
  PipelineConfig cfg;
  cfg.nu = 0.3;
  cfg.Delta = 3;
  cfg.d = 0.5;
  cfg.epsilon = 0.15;
  cfg.q = 3;
  cfg.zeta = 0.15;
  cfg.M = 20;
  return cfg;
}

TEST(OrderPieces, SpecExamples) {
  RootedTree small = random_tree(10, 3, 1);
  auto d1 = partition_subtrees(small, 20);
  auto o1 = order_pieces({small}, {d1});
  ASSERT_EQ(o1.size(), 1u);

  RootedTree p = path_tree(90);
  auto dp = partition_subtrees(p, 10);
  ASSERT_GE(dp.pieces.size(), 3u);
  auto op = order_pieces({p}, {dp});
  for (std::size_t k = 1; k < op.size(); ++k)
    EXPECT_LT(p.depth(dp.pieces[op[k - 1].piece].root), p.depth(dp.pieces[op[k].piece].root));

  RootedTree q = random_tree(200, 3, 2);
  auto dq = partition_subtrees(q, 8);
  auto two = order_pieces({p, q}, {dp, dq});
  ASSERT_EQ(two.size(), dp.pieces.size() + dq.pieces.size());
  for (std::size_t k = 0; k < two.size(); ++k) EXPECT_EQ(two[k].tree, k < dp.pieces.size() ? 0 : 1);
}

TEST(OrderPieces, AncestorsFirstOnRandomTrees) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RootedTree t = random_tree(300, 4, seed);
    auto dec = partition_subtrees(t, 6);
    auto ord = order_pieces({t}, {dec});
    std::vector<int> pos(dec.pieces.size());
    for (std::size_t k = 0; k < ord.size(); ++k) pos[ord[k].piece] = static_cast<int>(k);
    for (std::size_t p = 0; p < dec.pieces.size(); ++p) {
      int r = dec.pieces[p].root;
      if (t.parent(r) < 0) continue;
      EXPECT_LT(pos[dec.piece_of[t.parent(r)]], pos[p]);
    }
  }
}

// One slot pair whose hub is complete bipartite 40 + 40 and whose V sides are empty.
CarvedMatching hub_only_structure(Graph& host) {
  host = Graph(80);
  CarvedMatching cm;
  cm.n_bullet = 0;
  cm.density = 1.0;
  SlotPair sp;
  sp.U = {iota_set(40), iota_set(40, 40)};
  cm.slots.push_back(sp);
  for (int a = 0; a < 40; ++a)
    for (int b = 40; b < 80; ++b) host.add_edge(a, b);
  cm.carrier = host;
  return cm;
}

TreeJob prepared(const RootedTree& t, int r, std::uint64_t seed) {
  TreeJob job;
  job.tree = t;
  for (int v = 0; v < t.vertex_count(); ++v) job.origin.emplace_back(0, v);
  job.dec = partition_subtrees(t, t.vertex_count());
  job.split = assign_slots(split_connector(t, job.dec), r, 1.0, 100.0, seed);
  return job;
}

TEST(EmbedConnectors, EmptyInputLeavesStateUnchanged) {
  Graph host;
  auto cm = hub_only_structure(host);
  PackingState st(80, {});
  CollectionPacker packer(host, cm, planted_config(), st);
  packer.embed_connectors();
  EXPECT_EQ(st.used.edge_count(), 0);
  EXPECT_TRUE(st.failures.empty());
}

TEST(EmbedConnectors, RootTwoChildrenFourGrandchildren) {
  Graph host;
  auto cm = hub_only_structure(host);
  RootedTree t({-1, 0, 0, 1, 1, 2, 2}, 0);
  PackingState st(80, {t});
  CollectionPacker packer(host, cm, planted_config(), st);
  packer.add_job(prepared(t, 1, 3));
  packer.embed_connectors();
  ASSERT_TRUE(packer.jobs()[0].alive);
  EXPECT_EQ(st.used.edge_count(), 6);
  const auto& img = packer.jobs()[0].image;
  std::set<int> distinct(img.begin(), img.end());
  EXPECT_EQ(distinct.size(), 7u);
  for (auto [u, v] : t.edges()) EXPECT_TRUE(st.used.has_edge(img[u], img[v]));
  int total = 0;
  for (int u : packer.usage()) {
    EXPECT_LE(u, 20);
    total += u;
  }
  EXPECT_EQ(total, 7);
}

TEST(EmbedConnectors, FullHubFails) {
  Graph host;
  auto cm = hub_only_structure(host);
  RootedTree t({-1, 0, 0, 1, 1, 2, 2}, 0);
  // Twenty-one copies: 147 connector images but only 80 * 1 slots when M = 1.
  std::vector<RootedTree> many(12, t);
  PackingState st(80, many);
  auto cfg = planted_config();
  cfg.M = 1;
  CollectionPacker packer(host, cm, cfg, st);
  for (int k = 0; k < 12; ++k) packer.add_job(prepared(t, 1, static_cast<std::uint64_t>(k)));
  packer.embed_connectors();
  int alive = 0;
  for (const auto& j : packer.jobs()) alive += j.alive;
  EXPECT_LT(alive, 12);
  ASSERT_FALSE(st.failures.empty());
  EXPECT_EQ(st.failures.front().stage, "connector");
  for (int u : packer.usage()) EXPECT_LE(u, 1);
  // Rolled-back trees leave no edges behind.
  EXPECT_EQ(st.used.edge_count(), 6LL * alive);
}

TEST(BatchForests, SpecExamples) {
  auto one = batch_forests({50}, 100, 8, 0.1);
  ASSERT_EQ(one.batches.size(), 1u);

  std::vector<long long> twelve(12, 120);
  auto plan = batch_forests(twelve, 100, 8, 0.1);
  EXPECT_EQ(plan.w, 3);
  ASSERT_EQ(plan.batches.size(), 3u);
  long long sum = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(plan.batches[b].size(), 4u);
    EXPECT_LE(static_cast<double>(plan.load[b]), plan.cap);
    sum += plan.load[b];
  }
  EXPECT_EQ(sum, 1440);
  EXPECT_TRUE(plan.warnings.empty());

  EXPECT_THROW(batch_forests({1000}, 100, 8, 0.1), ParameterError);
}

TEST(BatchForests, LoadsSumAndStayUnderCap) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = make_rng(seed);
    std::vector<long long> fe(static_cast<std::size_t>(uniform_int(rng, 1, 30)));
    long long total = 0;
    for (auto& e : fe) total += (e = uniform_int(rng, 0, 300));
    auto plan = batch_forests(fe, 100, 8, 0.1);
    long long sum = 0;
    std::vector<int> seen(fe.size(), 0);
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      long long load = 0;
      for (int f : plan.batches[b]) {
        ++seen[f];
        load += fe[f];
      }
      EXPECT_EQ(load, plan.load[b]);
      EXPECT_LE(static_cast<double>(load), plan.cap + 1e-9);
      sum += load;
    }
    EXPECT_EQ(sum, total);
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

void expect_regular(const BatchPacking& bp, int q) {
  for (int v = 0; v < 2 * bp.n; ++v) EXPECT_EQ(bp.H.degree(v), q);
  for (auto [a, b] : bp.H.edges()) EXPECT_TRUE((a < bp.n) != (b < bp.n));
  for (auto [a, b] : bp.required.edges()) EXPECT_TRUE(bp.H.has_edge(a, b));
}

TEST(PackBatchRegular, EmptyBatchGivesRegularGraph) {
  auto bp = pack_batch_regular({}, 10, 3, 0.1, 1);
  expect_regular(bp, 3);
  EXPECT_EQ(bp.H.edge_count(), 30);
  EXPECT_TRUE(bp.place.empty());
}

TEST(PackBatchRegular, PerfectMatchingWithQTwo) {
  ForestSpec f;
  int n = 12;
  for (int i = 0; i < n; ++i) {
    f.X[0].push_back(i);
    f.X[1].push_back(100 + i);
    f.edges.emplace_back(i, 100 + i);
  }
  auto bp = pack_batch_regular({f}, n, 2, 0.05, 2);
  expect_regular(bp, 2);
  for (auto [a, b] : f.edges) EXPECT_TRUE(bp.H.has_edge(bp.place[0].at(a), bp.place[0].at(b)));
}

TEST(PackBatchRegular, OverCapIsParameterError) {
  ForestSpec f;
  for (int i = 0; i < 10; ++i) {
    f.X[0].push_back(i);
    f.X[1].push_back(10 + i);
    f.edges.emplace_back(i, 10 + i);
  }
  EXPECT_THROW(pack_batch_regular({f}, 10, 1, 0.1, 0), ParameterError);
}

TEST(PackBatchRegular, RandomForestsKeepStructure) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    int n = 60, q = 6;
    std::vector<ForestSpec> specs;
    for (int f = 0; f < 3; ++f) {
      RootedTree t = random_tree(50, 3, seed * 10 + f);
      auto [a, b] = bipartition(t, 0);
      ForestSpec s;
      s.X = {a, b};
      std::set<int> in_a(a.begin(), a.end());
      for (auto [u, v] : t.edges()) s.edges.push_back(in_a.count(u) ? Edge{u, v} : Edge{v, u});
      s.W = {a.front(), b.front()};
      specs.push_back(s);
    }
    auto bp = pack_batch_regular(specs, n, q, 0.1, seed);
    expect_regular(bp, q);
    std::set<int> w_images;
    for (std::size_t f = 0; f < specs.size(); ++f) {
      std::set<int> imgs;
      for (int i = 0; i < 2; ++i)
        for (int v : specs[f].X[i]) {
          int a = bp.place[f].at(v);
          EXPECT_EQ(a < n, i == 0);
          EXPECT_TRUE(imgs.insert(a).second);
        }
      for (auto [u, v] : specs[f].edges) EXPECT_TRUE(bp.required.has_edge(bp.place[f].at(u), bp.place[f].at(v)));
      for (int v : specs[f].W) EXPECT_TRUE(w_images.insert(bp.place[f].at(v)).second);
    }
  }
}

TEST(BlowupPack, EmptyGraphIsAnyBijection) {
  Graph host = complete_bipartite(10, 10);
  Graph used(20);
  std::array<VertexSet, 2> sides{iota_set(10), iota_set(10, 10)};
  BlowupBatch b{Graph(20), Graph(20), {}};
  ConflictGraph gamma;
  gamma.build();
  auto out = blowup_pack(host, used, sides, {b}, gamma, 5, 1);
  ASSERT_TRUE(out.ok());
  EXPECT_TRUE(check_blowup_contract(host, used, sides, {b}, gamma, out).empty());
}

TEST(BlowupPack, ThreeRegularIntoCompletePair) {
  Graph host = complete_bipartite(60, 60);
  Graph used(120);
  std::array<VertexSet, 2> sides{iota_set(60), iota_set(60, 60)};
  auto bp = pack_batch_regular({}, 50, 3, 0.1, 4);
  // Embed the 50 + 50 graph inside 60 + 60 by padding with isolated vertices.
  Graph H(120);
  for (auto [a, b] : bp.H.edges()) H.add_edge(a, b + 10);
  BlowupBatch b{H, H, {}};
  ConflictGraph gamma;
  gamma.build();
  auto out = blowup_pack(host, used, sides, {b}, gamma, 5, 2);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out.consumed.edge_count(), 75 * 2);
  EXPECT_TRUE(check_blowup_contract(host, used, sides, {b}, gamma, out).empty());
}

TEST(BlowupPack, ForcedCollisionFails) {
  Graph host = complete_bipartite(5, 5);
  Graph used(10);
  std::array<VertexSet, 2> sides{iota_set(5), iota_set(5, 5)};
  BlowupBatch b1{Graph(10), Graph(10), {{0, {2}}}};
  BlowupBatch b2 = b1;
  ConflictGraph gamma;
  gamma.add_node(0, 0, {7});
  gamma.add_node(1, 0, {7});
  gamma.build();
  ASSERT_EQ(gamma.max_degree(), 1);
  auto out = blowup_pack(host, used, sides, {b1, b2}, gamma, 4, 3);
  EXPECT_FALSE(out.ok());
  EXPECT_TRUE(out.errors[0].empty());
  EXPECT_NE(out.errors[1].find("stuck"), std::string::npos);
  EXPECT_EQ(out.attempts[1], 4);
}

TEST(PackCollection, EmptyCollection) {
  PlantedSpec ps;
  ps.pairs = 2;
  ps.n_bullet = 40;
  ps.hub_block = 10;
  auto pi = planted_instance(ps);
  Graph host = pi.structure.matchings[0].carrier;
  PackingState st(host.vertex_count(), {});
  pack_collection(host, pi.structure.matchings[0], {}, st, planted_config());
  EXPECT_EQ(st.used.edge_count(), 0);
}

TEST(PackCollection, PlantedFiveTrees) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PlantedSpec ps;
    ps.pairs = 2;
    ps.n_bullet = 150;
    ps.hub_block = 30;
    ps.seed = seed;
    ps.reserve_p = 0.5;
    auto pi = planted_instance(ps);
    const auto& cm = pi.structure.matchings[0];
    Graph host = cm.carrier;
    host.merge(pi.reserve);
    std::vector<RootedTree> trees;
    for (std::uint64_t k = 0; k < 5; ++k) trees.push_back(random_tree(400, 3, 100 + k + 10 * seed));
    PackingState st(host.vertex_count(), trees);
    pack_collection(host, cm, {0, 1, 2, 3, 4}, st, planted_config(), 0, &pi.reserve);
    for (const auto& f : st.failures) ADD_FAILURE() << "seed " << seed << ": " << f.to_json().dump();
    EXPECT_EQ(st.packed_count(), 5);
    auto a = audit(host, st);
    EXPECT_TRUE(a.ok) << a.why;
    EXPECT_EQ(a.edges, 5 * 399);
  }
}

TEST(PackCollection, ViolatingA3IsPreconditionError) {
  PlantedSpec ps;
  ps.pairs = 1;
  ps.n_bullet = 20;
  ps.hub_block = 5;
  auto pi = planted_instance(ps);
  const auto& cm = pi.structure.matchings[0];
  // (1 - nu) r d n^2 = 0.7 * 1 * 0.5 * 400 = 140; send 2x that.
  std::vector<RootedTree> trees(10, path_tree(28));
  PackingState st(pi.g.vertex_count(), trees);
  std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(pack_collection(cm.carrier, cm, ids, st, planted_config()), ParameterError);
}

TEST(PackTheorem, SingleMatchingEqualsOneCollection) {
  PlantedSpec ps;
  ps.pairs = 2;
  ps.n_bullet = 150;
  ps.hub_block = 30;
  ps.seed = 5;
  ps.reserve_p = 0.5;
  auto pi = planted_instance(ps);
  std::vector<RootedTree> trees;
  for (int k = 0; k < 4; ++k) trees.push_back(random_tree(350, 3, 40 + k));
  auto cfg = planted_config();
  auto st = pack_theorem(pi.g, pi.reserve, pi.structure, trees, cfg);

  Graph host = pi.structure.matchings[0].carrier;
  host.merge(pi.reserve);
  PackingState direct(host.vertex_count(), trees);
  pack_collection(host, pi.structure.matchings[0], {0, 1, 2, 3}, direct, cfg, 0, &pi.reserve);
  EXPECT_EQ(st.to_json()["trees"], direct.to_json()["trees"]);
  EXPECT_EQ(st.used, direct.used);
}

TEST(PackTheorem, TooManyTreeEdgesIsPreconditionError) {
  PlantedSpec ps;
  ps.pairs = 1;
  ps.n_bullet = 20;
  ps.hub_block = 5;
  auto pi = planted_instance(ps);
  std::vector<RootedTree> trees(20, path_tree(20));
  EXPECT_THROW(pack_theorem(pi.g, pi.reserve, pi.structure, trees, planted_config()), ParameterError);
}

TEST(PackTheorem, StateJsonShape) {
  PlantedSpec ps;
  ps.pairs = 1;
  ps.n_bullet = 60;
  ps.hub_block = 15;
  ps.seed = 2;
  auto pi = planted_instance(ps);
  std::vector<RootedTree> trees{random_tree(70, 3, 1), random_tree(60, 3, 2)};
  auto cfg = planted_config();
  cfg.piece_size = 10;
  auto st = pack_theorem(pi.g, pi.reserve, pi.structure, trees, cfg);
  auto js = st.to_json();
  EXPECT_EQ(js["trees"].size(), 2u);
  EXPECT_EQ(js["used_edges"], st.used.edge_count());
  auto back = state_from_json(js);
  for (std::size_t i = 0; i < st.trees.size(); ++i) EXPECT_EQ(back.trees[i].map, st.trees[i].map);
}

TEST(PackTheorem, BuildsStructureFromRandomHost) {
  Graph host = erdos_renyi(600, 0.5, 1);
  Graph hub = sparsify_preserving_holes(host, 0.2, 0.01, 1);
  Graph g = host;
  for (auto [u, v] : hub.edges()) g.remove_edge(u, v);
  PipelineConfig cfg = planted_config();
  cfg.d = 0.3;
  cfg.r = 2;
  cfg.alpha = 0.5;
  cfg.hub_share = 0.2;
  cfg.seed = 1;
  std::vector<RootedTree> trees;
  for (int k = 0; k < 4; ++k) trees.push_back(random_tree(200, 3, 100 + k));
  MatchingStructure ms;
  auto st = pack_theorem(g, hub, trees, cfg, &ms);
  EXPECT_GE(ms.kappa, 1);
  EXPECT_EQ(st.packed_count(), 4);
  auto a = audit(host, st);
  EXPECT_TRUE(a.ok) << a.why;
  EXPECT_EQ(a.edges, 4 * 199);
}

}  // namespace
}  // namespace treepack
