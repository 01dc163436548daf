#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "treepack/graph.hpp"

namespace treepack {

inline Graph complete(int n) {
  Graph g(n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

inline Graph empty_graph(int n) { return Graph(n); }

// Parts [0, a) and [a, a + b).
inline Graph complete_bipartite(int a, int b) {
  if (a < 0 || b < 0) throw ParameterError("complete_bipartite: negative part");
  Graph g(a + b);
  for (int u = 0; u < a; ++u)
    for (int v = a; v < a + b; ++v) g.add_edge(u, v);
  return g;
}

// Two disjoint copies of K_m on [0, m) and [m, 2m).
inline Graph two_cliques(int m) {
  if (m < 0) throw ParameterError("two_cliques: negative size");
  Graph g(2 * m);
  for (int c = 0; c < 2; ++c)
    for (int u = 0; u < m; ++u)
      for (int v = u + 1; v < m; ++v) g.add_edge(c * m + u, c * m + v);
  return g;
}

// Adds each pair of `vs` independently with probability p.
inline void add_random_edges(Graph& g, const VertexSet& vs, double p, Rng& rng) {
  if (p <= 0) return;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j)
      if (bernoulli(rng, p)) g.add_edge(vs[i], vs[j]);
}

inline void add_random_bipartite_edges(Graph& g, const VertexSet& a, const VertexSet& b, double p, Rng& rng) {
  if (p <= 0) return;
  for (Vertex u : a)
    for (Vertex v : b)
      if (bernoulli(rng, p)) g.add_edge(u, v);
}

inline Graph erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 0 || p < 0 || p > 1) throw ParameterError("erdos_renyi: bad parameters");
  Graph g(n);
  Rng rng = make_rng(seed);
  add_random_edges(g, iota_set(n), p, rng);
  return g;
}

// Part sizes for the unbalanced construction: ((1-xi)n/2, (1+xi)n/2), rounded.
inline std::pair<int, int> unbalanced_parts(int n, double xi) {
  int a = static_cast<int>(std::lround((1.0 - xi) * n / 2.0));
  return {a, n - a};
}

// Complete bipartite graph between parts of sizes (1-xi)n/2 and (1+xi)n/2,
// plus an independent G(., xi/2) inside each part. Smaller part is [0, a).
inline Graph unbalanced_noisy_bipartite(int n, double xi, std::uint64_t seed) {
  if (n < 2 || xi < 0 || xi >= 1) throw ParameterError("unbalanced_noisy_bipartite: bad parameters");
  auto [a, b] = unbalanced_parts(n, xi);
  Graph g = complete_bipartite(a, b);
  Rng rng = make_rng(seed);
  add_random_edges(g, iota_set(a), xi / 2, rng);
  add_random_edges(g, iota_set(b, a), xi / 2, rng);
  return g;
}

struct PerturbSpec {
  Graph base;
  double edge_probability = 0;
  std::uint64_t seed = 0;
};

// Edge union of the base graph with a fresh G(n, p).
inline Graph perturbed(const PerturbSpec& spec) {
  if (spec.edge_probability < 0 || spec.edge_probability > 1)
    throw ParameterError("perturbed: probability outside [0,1]");
  Graph g = spec.base;
  g.merge(erdos_renyi(spec.base.vertex_count(), spec.edge_probability, spec.seed));
  return g;
}

// Complete rooted 3-ary tree of the given height; vertex 0 is the root and
// the children of v are 3v+1, 3v+2, 3v+3.
inline Graph ternary_tree(int height) {
  if (height < 0 || height > 9) throw ParameterError("ternary_tree: height out of range");
  int n = 0;
  for (int h = 0, layer = 1; h <= height; ++h, layer *= 3) n += layer;
  Graph g(n);
  for (int v = 1; v < n; ++v) g.add_edge(v, (v - 1) / 3);
  return g;
}

}  // namespace treepack
