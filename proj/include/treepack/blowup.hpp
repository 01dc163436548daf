#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "treepack/common.hpp"
#include "treepack/graph.hpp"

namespace treepack {

// ---- forest batching ----

struct BatchPlan {
  std::vector<std::vector<int>> batches;  // forest indices per batch
  std::vector<long long> load;            // edges per batch
  int w = 0;                              // formula batch count
  double cap = 0;                         // (1 - 3 zeta) q n
  std::vector<std::string> warnings;
};

// Greedy bin packing: largest forest first into the least-loaded batch that
// stays under the cap, opening a batch when none fits. Starts from
// w = ceil(e / ((1 - 4 zeta) q n)) batches.
inline BatchPlan batch_forests(const std::vector<long long>& forest_edges, int n, int q, double zeta) {
  if (n < 1 || q < 1) throw ParameterError("batch_forests: n and q must be positive");
  BatchPlan plan;
  plan.cap = (1.0 - 3.0 * zeta) * q * n;
  long long total = 0;
  for (std::size_t f = 0; f < forest_edges.size(); ++f) {
    if (static_cast<double>(forest_edges[f]) > plan.cap + 1e-9)
      throw ParameterError("batch_forests: forest " + std::to_string(f) + " has " + std::to_string(forest_edges[f]) +
                           " edges, above (1-3 zeta) q n = " + std::to_string(plan.cap));
    total += forest_edges[f];
  }
  if (forest_edges.empty()) return plan;
  plan.w = std::max(1, static_cast<int>(std::ceil(static_cast<double>(total) / ((1.0 - 4.0 * zeta) * q * n) - 1e-9)));
  plan.batches.assign(static_cast<std::size_t>(plan.w), {});
  plan.load.assign(static_cast<std::size_t>(plan.w), 0);
  std::vector<int> order(forest_edges.size());
  for (std::size_t f = 0; f < order.size(); ++f) order[f] = static_cast<int>(f);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return forest_edges[a] > forest_edges[b]; });
  for (int f : order) {
    int best = -1;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      if (static_cast<double>(plan.load[b] + forest_edges[f]) > plan.cap + 1e-9) continue;
      if (best < 0 || plan.load[b] < plan.load[best]) best = static_cast<int>(b);
    }
    if (best < 0) {
      plan.batches.emplace_back();
      plan.load.push_back(0);
      best = static_cast<int>(plan.batches.size()) - 1;
    }
    plan.batches[best].push_back(f);
    plan.load[best] += forest_edges[f];
  }
  // Drop batches that stayed empty (only possible when w overshoots the forest count).
  for (std::size_t b = plan.batches.size(); b-- > 0;)
    if (plan.batches[b].empty()) {
      plan.batches.erase(plan.batches.begin() + static_cast<long>(b));
      plan.load.erase(plan.load.begin() + static_cast<long>(b));
    }
  double mean = static_cast<double>(total) / static_cast<double>(plan.batches.size());
  for (std::size_t b = 0; b < plan.batches.size(); ++b)
    if (std::abs(static_cast<double>(plan.load[b]) - mean) > 4.0 * n) {
      std::ostringstream os;
      os << "batch " << b << " load " << plan.load[b] << " outside mean " << mean << " +- 4n";
      plan.warnings.push_back(os.str());
    }
  return plan;
}

// ---- regular container for a batch ----

// A forest given by its two colour classes and its edges, over arbitrary labels.
struct ForestSpec {
  std::array<VertexSet, 2> X;
  std::vector<Edge> edges;  // (label in X[0], label in X[1])
  VertexSet W;              // labels whose images must avoid other forests' W images
};

// H lives on 2n abstract vertices: [0, n) is side 0, [n, 2n) is side 1.
struct BatchPacking {
  int n = 0;
  Graph H;
  Graph required;  // the forest edges inside H
  std::vector<std::map<int, int>> place;  // per forest: label -> abstract vertex
  int attempts = 0;
};

namespace detail {

// Places one forest; returns false when the degree budget or an edge clash blocks it.
inline bool place_forest(const ForestSpec& f, int n, int q, std::vector<int>& deg, Graph& req, Bits& w_images,
                         std::map<int, int>& out, Rng& rng) {
  std::map<int, int> fdeg;
  for (auto [a, b] : f.edges) {
    ++fdeg[a];
    ++fdeg[b];
  }
  std::map<int, char> is_w;
  for (int v : f.W) is_w[v] = 1;
  out.clear();
  for (int side = 0; side < 2; ++side) {
    VertexSet pos = iota_set(n, side * n);
    shuffle(pos, rng);
    std::stable_sort(pos.begin(), pos.end(), [&](int a, int b) { return deg[a] < deg[b]; });
    VertexSet labels = f.X[side];
    shuffle(labels, rng);
    std::stable_sort(labels.begin(), labels.end(), [&](int a, int b) { return fdeg[a] > fdeg[b]; });
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (int v : labels) {
      int chosen = -1;
      for (std::size_t k = 0; k < pos.size(); ++k) {
        int p = pos[k];
        if (taken[p - side * n]) continue;
        if (deg[p] + fdeg[v] > q) continue;
        if (is_w.count(v) && w_images.test(p)) continue;
        chosen = p;
        break;
      }
      if (chosen < 0) return false;
      taken[chosen - side * n] = 1;
      out[v] = chosen;
    }
  }
  for (auto [a, b] : f.edges)
    if (req.has_edge(out.at(a), out.at(b))) return false;
  for (auto [a, b] : f.edges) {
    req.add_edge(out.at(a), out.at(b));
    ++deg[out.at(a)];
    ++deg[out.at(b)];
  }
  for (int v : f.W) w_images.set(out.at(v));
  return true;
}

// Fills degree deficits with bipartite edges so every vertex has degree q.
// Greedy max-deficit matching, then edge switches when a vertex is blocked.
inline bool complete_regular(Graph& H, const Graph& req, int n, int q, Rng& rng) {
  std::vector<int> def(static_cast<std::size_t>(2 * n));
  for (int v = 0; v < 2 * n; ++v) def[v] = q - H.degree(v);
  std::vector<Edge> added;
  auto right_order = [&]() {
    VertexSet r = iota_set(n, n);
    shuffle(r, rng);
    std::stable_sort(r.begin(), r.end(), [&](int a, int b) { return def[a] > def[b]; });
    return r;
  };
  VertexSet left = iota_set(n);
  shuffle(left, rng);
  std::stable_sort(left.begin(), left.end(), [&](int a, int b) { return def[a] > def[b]; });
  for (int a : left) {
    VertexSet right = right_order();
    for (int b : right) {
      if (def[a] == 0) break;
      if (def[b] == 0) break;
      if (H.has_edge(a, b)) continue;
      H.add_edge(a, b);
      added.emplace_back(a, b);
      --def[a];
      --def[b];
    }
    while (def[a] > 0) {
      // Some right vertex b still has deficit but is already joined to a.
      int b = -1;
      for (int v = n; v < 2 * n; ++v)
        if (def[v] > 0) {
          b = v;
          break;
        }
      if (b < 0) return false;
      bool fixed = false;
      shuffle(added, rng);
      for (std::size_t k = 0; k < added.size() && !fixed; ++k) {
        auto [a2, b2] = added[k];
        if (a2 == a || b2 == b || H.has_edge(a, b2) || H.has_edge(a2, b) || req.has_edge(a2, b2)) continue;
        H.remove_edge(a2, b2);
        H.add_edge(a, b2);
        H.add_edge(a2, b);
        added[k] = {a, b2};
        added.emplace_back(a2, b);
        --def[a];
        --def[b];
        fixed = true;
      }
      if (!fixed) return false;
    }
  }
  for (int v = 0; v < 2 * n; ++v)
    if (def[v] != 0) return false;
  return true;
}

}  // namespace detail

// Randomized stand-in for the packing lemma: places the forests of a batch
// into one bipartite graph with degrees <= q (W images disjoint across
// forests), then completes it to an exactly q-regular bipartite H.
inline BatchPacking pack_batch_regular(const std::vector<ForestSpec>& forests, int n, int q, double zeta,
                                       std::uint64_t seed, int budget = 50) {
  long long e = 0;
  for (const auto& f : forests) {
    e += static_cast<long long>(f.edges.size());
    if (static_cast<int>(f.X[0].size()) > n || static_cast<int>(f.X[1].size()) > n)
      throw ParameterError("pack_batch_regular: forest class larger than n");
  }
  if (static_cast<double>(e) > (1.0 - 3.0 * zeta) * q * n + 1e-9)
    throw ParameterError("pack_batch_regular: batch has " + std::to_string(e) + " edges, above (1-3 zeta) q n");
  if (q > n) throw ParameterError("pack_batch_regular: q exceeds n");
  // Larger forests first.
  std::vector<std::size_t> order(forests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return forests[a].edges.size() > forests[b].edges.size(); });
  for (int attempt = 0; attempt < budget; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    BatchPacking bp;
    bp.n = n;
    bp.required = Graph(2 * n);
    bp.place.assign(forests.size(), {});
    std::vector<int> deg(static_cast<std::size_t>(2 * n), 0);
    Bits w_images(2 * n);
    bool ok = true;
    for (std::size_t f : order)
      if (!detail::place_forest(forests[f], n, q, deg, bp.required, w_images, bp.place[f], rng)) {
        ok = false;
        break;
      }
    if (!ok) continue;
    bp.H = bp.required;
    if (!detail::complete_regular(bp.H, bp.required, n, q, rng)) continue;
    for (int v = 0; v < 2 * n; ++v)
      if (bp.H.degree(v) != q) throw InternalError("pack_batch_regular: completion is not regular");
    bp.attempts = attempt + 1;
    return bp;
  }
  throw ProbabilisticFailure("pack_batch_regular: placement or completion failed", budget);
}

// ---- conflict graph ----

struct ConflictGraph {
  struct Node {
    int batch = 0;
    int vertex = 0;  // abstract vertex inside the batch
    VertexSet hubs;  // images of its already-embedded neighbours
  };
  std::vector<Node> nodes;
  std::vector<std::vector<int>> adj;

  int add_node(int batch, int vertex, VertexSet hubs) {
    std::sort(hubs.begin(), hubs.end());
    index_[{batch, vertex}] = static_cast<int>(nodes.size());
    nodes.push_back({batch, vertex, std::move(hubs)});
    return static_cast<int>(nodes.size()) - 1;
  }

  // Joins nodes of different batches whose hub images intersect.
  void build() {
    adj.assign(nodes.size(), {});
    std::map<int, std::vector<int>> by_hub;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (int h : nodes[i].hubs) by_hub[h].push_back(static_cast<int>(i));
    for (auto& [h, list] : by_hub)
      for (std::size_t a = 0; a < list.size(); ++a)
        for (std::size_t b = a + 1; b < list.size(); ++b) {
          int x = list[a], y = list[b];
          if (nodes[x].batch == nodes[y].batch) continue;
          adj[x].push_back(y);
          adj[y].push_back(x);
        }
    for (auto& l : adj) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  }

  int node_of(int batch, int vertex) const {
    auto it = index_.find({batch, vertex});
    return it == index_.end() ? -1 : it->second;
  }

  int max_degree() const {
    std::size_t d = 0;
    for (const auto& l : adj) d = std::max(d, l.size());
    return static_cast<int>(d);
  }

  // Largest number of neighbours a node has inside one other batch.
  int max_batch_degree() const {
    int best = 0;
    for (const auto& l : adj) {
      std::map<int, int> per;
      for (int y : l) best = std::max(best, ++per[nodes[y].batch]);
    }
    return best;
  }

 private:
  std::map<std::pair<int, int>, int> index_;
};

// ---- blow-up stand-in ----

struct BlowupBatch {
  Graph H;         // abstract vertices [0, |side 0|) map to side 0, the rest to side 1
  Graph required;  // edges of H that must land on unused host edges
  std::map<int, VertexSet> targets;  // abstract vertex -> allowed host images A_y
};

struct BlowupOutcome {
  std::vector<std::vector<int>> maps;  // per batch, abstract -> host; empty if the batch failed
  std::vector<std::string> errors;     // per batch, empty on success
  std::vector<int> attempts;
  Graph consumed;                      // host edges taken by required edges

  bool ok() const {
    for (const auto& e : errors)
      if (!e.empty()) return false;
    return true;
  }
};

// Randomized sequential embedding of each batch into the host pair. Vertices
// with required edges or targets are placed in BFS order over the required
// graph, starting from the vertex with the smallest target; a candidate must
// be free, on its side, inside its target, joined by unused host edges to its
// placed required neighbours, and distinct from the images of conflicting
// nodes in earlier batches. Ties go to the candidate with the most unused
// edges into the other side. The rest of each batch is a random bijection.
inline BlowupOutcome blowup_pack(const Graph& host, const Graph& used, const std::array<VertexSet, 2>& sides,
                                 const std::vector<BlowupBatch>& batches, const ConflictGraph& gamma, int budget,
                                 std::uint64_t seed) {
  int N = host.vertex_count();
  int n0 = static_cast<int>(sides[0].size()), n1 = static_cast<int>(sides[1].size());
  std::array<Bits, 2> side_bits{Bits(N, sides[0]), Bits(N, sides[1])};
  BlowupOutcome out;
  out.consumed = Graph(N);
  out.maps.assign(batches.size(), {});
  out.errors.assign(batches.size(), "");
  out.attempts.assign(batches.size(), 0);
  auto avail = [&](int h) {
    Bits r = host.row(h);
    r.subtract(used.row(h));
    r.subtract(out.consumed.row(h));
    return r;
  };
  for (std::size_t j = 0; j < batches.size(); ++j) {
    const auto& B = batches[j];
    int hn = B.H.vertex_count();
    if (hn != n0 + n1 || B.required.vertex_count() != hn)
      throw ParameterError("blowup_pack: batch vertex count does not match the host pair");
    std::map<int, Bits> target_bits;
    for (const auto& [v, set] : B.targets) target_bits.emplace(v, Bits(N, set));
    std::string last_error;
    for (int attempt = 0; attempt < budget; ++attempt) {
      Rng rng = make_rng(seed, j * 100003ULL + static_cast<std::uint64_t>(attempt));
      std::vector<int> img(static_cast<std::size_t>(hn), -1);
      Bits taken(N);
      // BFS order over the required graph.
      VertexSet starts;
      for (const auto& [v, set] : B.targets) starts.push_back(v);
      shuffle(starts, rng);
      std::stable_sort(starts.begin(), starts.end(),
                       [&](int a, int b) { return B.targets.at(a).size() < B.targets.at(b).size(); });
      VertexSet rest;
      for (int v = 0; v < hn; ++v)
        if (B.required.degree(v) > 0) rest.push_back(v);
      shuffle(rest, rng);
      starts.insert(starts.end(), rest.begin(), rest.end());
      std::vector<char> queued(static_cast<std::size_t>(hn), 0);
      VertexSet order;
      for (int s : starts) {
        if (queued[s]) continue;
        queued[s] = 1;
        std::size_t head = order.size();
        order.push_back(s);
        while (head < order.size()) {
          int v = order[head++];
          VertexSet nb = B.required.neighbors(v);
          shuffle(nb, rng);
          for (int u : nb)
            if (!queued[u]) {
              queued[u] = 1;
              order.push_back(u);
            }
        }
      }
      bool ok = true;
      for (int v : order) {
        int side = v < n0 ? 0 : 1;
        Bits c = side_bits[side];
        c.subtract(taken);
        auto t = target_bits.find(v);
        if (t != target_bits.end()) c &= t->second;
        int before = c.count();
        for (int u : B.required.neighbors(v))
          if (img[u] >= 0) c &= avail(img[u]);
        int node = gamma.node_of(static_cast<int>(j), v);
        if (node >= 0)
          for (int o : gamma.adj[node]) {
            const auto& on = gamma.nodes[o];
            if (on.batch < static_cast<int>(j) && !out.maps[on.batch].empty()) {
              int h = out.maps[on.batch][on.vertex];
              if (h >= 0) c.reset(h);
            }
          }
        if (!c.any()) {
          std::ostringstream os;
          os << "batch " << j << ": stuck at abstract vertex " << v << " with " << before
             << " free candidates before edge and conflict filters";
          last_error = os.str();
          ok = false;
          break;
        }
        VertexSet cands = c.members();
        auto pick = sample_without_replacement(cands, 8, rng);
        int best = -1, best_deg = -1;
        for (int h : pick) {
          Bits r = avail(h);
          int dg = r.count_and(side_bits[1 - side]);
          if (dg > best_deg) {
            best_deg = dg;
            best = h;
          }
        }
        img[v] = best;
        taken.set(best);
      }
      out.attempts[j] = attempt + 1;
      if (!ok) continue;
      for (int side = 0; side < 2; ++side) {
        VertexSet free;
        for (int h : sides[side])
          if (!taken.test(h)) free.push_back(h);
        shuffle(free, rng);
        std::size_t k = 0;
        int lo = side == 0 ? 0 : n0, hi = side == 0 ? n0 : hn;
        for (int v = lo; v < hi; ++v)
          if (img[v] < 0) img[v] = free[k++];
      }
      for (auto [a, b] : B.required.edges()) out.consumed.add_edge(img[a], img[b]);
      out.maps[j] = std::move(img);
      last_error.clear();
      break;
    }
    if (out.maps[j].empty())
      out.errors[j] = last_error.empty() ? "batch " + std::to_string(j) + ": retry budget exhausted" : last_error;
  }
  return out;
}

// Post-hoc audit of a blow-up outcome: (B1) side-respecting bijection,
// (B2) targets honoured, (B3) conflict nodes get distinct images, and every
// required edge lands on a distinct unused host edge. Returns the violations.
inline std::vector<std::string> check_blowup_contract(const Graph& host, const Graph& used,
                                                      const std::array<VertexSet, 2>& sides,
                                                      const std::vector<BlowupBatch>& batches,
                                                      const ConflictGraph& gamma, const BlowupOutcome& out) {
  std::vector<std::string> bad;
  int n0 = static_cast<int>(sides[0].size());
  std::map<Edge, int> edge_owner;
  for (std::size_t j = 0; j < batches.size(); ++j) {
    const auto& m = out.maps[j];
    if (m.empty()) continue;
    const auto& B = batches[j];
    std::array<std::vector<int>, 2> sorted_sides{sides[0], sides[1]};
    std::array<std::vector<int>, 2> images;
    for (int v = 0; v < static_cast<int>(m.size()); ++v) images[v < n0 ? 0 : 1].push_back(m[v]);
    for (int s = 0; s < 2; ++s) {
      std::sort(sorted_sides[s].begin(), sorted_sides[s].end());
      std::sort(images[s].begin(), images[s].end());
      if (images[s] != sorted_sides[s]) bad.push_back("B1: batch " + std::to_string(j) + " side " + std::to_string(s));
    }
    for (const auto& [v, set] : B.targets)
      if (!std::binary_search(set.begin(), set.end(), m[v]))
        bad.push_back("B2: batch " + std::to_string(j) + " vertex " + std::to_string(v));
    for (auto [a, b] : B.required.edges()) {
      Edge e = make_edge(m[a], m[b]);
      if (!host.has_edge(e.first, e.second) || used.has_edge(e.first, e.second))
        bad.push_back("edge: batch " + std::to_string(j) + " maps onto a missing or used host edge");
      if (!edge_owner.emplace(e, static_cast<int>(j)).second)
        bad.push_back("edge: host edge reused by batch " + std::to_string(j));
    }
  }
  for (std::size_t x = 0; x < gamma.adj.size(); ++x)
    for (int y : gamma.adj[x]) {
      if (static_cast<int>(x) > y) continue;
      const auto& a = gamma.nodes[x];
      const auto& b = gamma.nodes[y];
      if (out.maps[a.batch].empty() || out.maps[b.batch].empty()) continue;
      if (out.maps[a.batch][a.vertex] == out.maps[b.batch][b.vertex])
        bad.push_back("B3: nodes " + std::to_string(x) + " and " + std::to_string(y));
    }
  return bad;
}

}  // namespace treepack
