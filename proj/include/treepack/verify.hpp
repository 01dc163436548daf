#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "treepack/graph.hpp"
#include "treepack/packing.hpp"

// Auditors. They read only the tree shapes, the maps and the host edge
// lists, and rebuild every edge set from scratch.
namespace treepack {

struct AuditError : Error {
  explicit AuditError(const std::string& m) : Error("audit", m) {}
};

struct DuplicatedEdge {
  int a = 0, b = 0;
  std::vector<int> trees;  // ids of the trees whose images use the edge
};

struct TreeStatus {
  int id = 0;
  bool packed = false;
  bool valid = true;
  long long edges = 0;  // image edges counted for this tree
};

struct PackingReport {
  bool edge_disjoint = true;
  std::vector<DuplicatedEdge> duplicated;
  std::vector<std::string> invalid_images;
  long long used_edges = 0;    // image edges of packed trees, each host edge once
  long long host_edges = 0;    // e(g)
  double coverage = 0;         // used_edges / e(g), clipped to [0, 1]
  int hub_usage_max = 0;       // largest image degree over hub vertices
  std::vector<TreeStatus> per_tree_status;

  bool ok() const { return edge_disjoint && invalid_images.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json dup = nlohmann::json::array();
    for (const auto& d : duplicated) dup.push_back({{"edge", {d.a, d.b}}, {"trees", d.trees}});
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : per_tree_status)
      trees.push_back({{"id", t.id}, {"packed", t.packed}, {"valid", t.valid}, {"edges", t.edges}});
    return {{"edge_disjoint", edge_disjoint}, {"duplicated_edges", dup},
            {"invalid_images", invalid_images}, {"used_edges", used_edges},
            {"host_edges", host_edges},       {"coverage", coverage},
            {"hub_usage_max", hub_usage_max}, {"per_tree_status", trees}};
  }
};

namespace audit_detail {

using Pair = std::pair<int, int>;

inline Pair key(int a, int b) { return a < b ? Pair{a, b} : Pair{b, a}; }

inline std::set<Pair> edge_set(const Graph& g) {
  std::set<Pair> out;
  for (auto [a, b] : g.edges()) out.insert(key(a, b));
  return out;
}

}  // namespace audit_detail

// Hub vertices are the union of the state's recorded hub sets; a state
// without them falls back to vertices touched by hub edges but not by g.
inline PackingReport check_packing(const Graph& g, const Graph& hub, const PackingState& state) {
  using audit_detail::key;
  PackingReport rep;
  auto g_edges = audit_detail::edge_set(g);
  auto h_edges = audit_detail::edge_set(hub);
  rep.host_edges = static_cast<long long>(g_edges.size());
  int n = std::max(g.vertex_count(), hub.vertex_count());

  std::vector<char> is_hub(static_cast<std::size_t>(n), 0);
  bool have_sets = false;
  for (const auto& hs : state.hub_sets)
    for (int u : hs)
      if (u >= 0 && u < n) {
        is_hub[u] = 1;
        have_sets = true;
      }
  if (!have_sets) {
    std::vector<char> in_g(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : g_edges) in_g[a] = in_g[b] = 1;
    for (auto [a, b] : h_edges) {
      if (!in_g[a]) is_hub[a] = 1;
      if (!in_g[b]) is_hub[b] = 1;
    }
  }

  std::map<audit_detail::Pair, std::vector<int>> owners;
  std::vector<int> image_degree(static_cast<std::size_t>(n), 0);
  for (const auto& tr : state.trees) {
    TreeStatus ts;
    ts.id = tr.id;
    ts.packed = tr.packed;
    if (!tr.packed) {
      rep.per_tree_status.push_back(ts);
      continue;
    }
    const auto& par = tr.tree.parents();
    auto bad = [&](const std::string& why) {
      ts.valid = false;
      rep.invalid_images.push_back("tree " + std::to_string(tr.id) + ": " + why);
    };
    if (tr.map.size() != par.size()) {
      bad("map has " + std::to_string(tr.map.size()) + " entries for " + std::to_string(par.size()) + " vertices");
      rep.per_tree_status.push_back(ts);
      continue;
    }
    std::map<int, int> pre;
    for (std::size_t v = 0; v < tr.map.size(); ++v) {
      int h = tr.map[v];
      if (h < 0 || h >= n) {
        bad("vertex " + std::to_string(v) + " has no valid image");
        continue;
      }
      auto [it, fresh] = pre.emplace(h, static_cast<int>(v));
      if (!fresh)
        bad("vertices " + std::to_string(it->second) + " and " + std::to_string(v) + " share image " +
            std::to_string(h));
    }
    for (std::size_t v = 0; v < par.size(); ++v) {
      if (par[v] < 0) continue;
      int a = tr.map[v], b = tr.map[static_cast<std::size_t>(par[v])];
      if (a < 0 || b < 0 || a >= n || b >= n) continue;
      auto e = key(a, b);
      if (!g_edges.count(e) && !h_edges.count(e)) {
        bad("edge " + std::to_string(v) + "-" + std::to_string(par[v]) + " maps to non-edge " + std::to_string(a) +
            "-" + std::to_string(b));
        continue;
      }
      owners[e].push_back(tr.id);
      ++image_degree[a];
      ++image_degree[b];
      ++ts.edges;
    }
    rep.per_tree_status.push_back(ts);
  }
  for (const auto& [e, ids] : owners) {
    if (ids.size() > 1) {
      rep.edge_disjoint = false;
      rep.duplicated.push_back({e.first, e.second, ids});
    }
  }
  rep.used_edges = static_cast<long long>(owners.size());
  if (rep.host_edges > 0)
    rep.coverage = std::min(1.0, static_cast<double>(rep.used_edges) / static_cast<double>(rep.host_edges));
  for (int u = 0; u < n; ++u)
    if (is_hub[u]) rep.hub_usage_max = std::max(rep.hub_usage_max, image_degree[u]);
  return rep;
}

namespace audit_detail {

inline void check_embedding(const Graph& host, const std::vector<Pair>& tree_edges, const VertexSet& map,
                            const char* what) {
  int n = host.vertex_count();
  std::set<int> seen;
  for (int h : map) {
    if (h < 0 || h >= n) throw AuditError(std::string(what) + ": image outside the host");
    if (!seen.insert(h).second) throw AuditError(std::string(what) + ": image " + std::to_string(h) + " used twice");
  }
  for (auto [u, v] : tree_edges)
    if (!host.has_edge(map[u], map[v]))
      throw AuditError(std::string(what) + ": edge " + std::to_string(u) + "-" + std::to_string(v) +
                       " maps to a non-edge");
}

}  // namespace audit_detail

// path[k] is the host image of the k-th path vertex. Counts consecutive
// pairs that both lie in larger_part.
inline int path_intra_part_count(const Graph& host, const VertexSet& larger_part, const VertexSet& path) {
  std::vector<audit_detail::Pair> edges;
  for (std::size_t k = 1; k < path.size(); ++k) edges.emplace_back(static_cast<int>(k - 1), static_cast<int>(k));
  audit_detail::check_embedding(host, edges, path, "path_intra_part_count");
  std::set<int> big(larger_part.begin(), larger_part.end());
  int count = 0;
  for (auto [u, v] : edges)
    if (big.count(path[u]) && big.count(path[v])) ++count;
  return count;
}

// Tree edges whose images lie inside one part; part_a lists one part, every
// other host vertex is in the second part.
inline int ternary_noncrossing_count(const Graph& host, const VertexSet& part_a, const Graph& tree,
                                     const VertexSet& map) {
  if (static_cast<int>(map.size()) != tree.vertex_count())
    throw AuditError("ternary_noncrossing_count: map size differs from tree size");
  std::vector<audit_detail::Pair> edges;
  for (auto [u, v] : tree.edges()) edges.emplace_back(u, v);
  audit_detail::check_embedding(host, edges, map, "ternary_noncrossing_count");
  std::set<int> a(part_a.begin(), part_a.end());
  int count = 0;
  for (auto [u, v] : edges)
    if (a.count(map[u]) == a.count(map[v])) ++count;
  return count;
}

}  // namespace treepack
