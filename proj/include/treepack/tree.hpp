#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "treepack/graph.hpp"

namespace treepack {

class RootedTree {
 public:
  RootedTree() = default;

  // parent[root] must be -1; every other entry names the parent.
  RootedTree(std::vector<int> parent, int root) : parent_(std::move(parent)), root_(root) {
    int n = vertex_count();
    if (n == 0) {
      root_ = -1;
      return;
    }
    if (root_ < 0 || root_ >= n || parent_[root_] != -1) throw ParameterError("RootedTree: bad root");
    children_.assign(static_cast<std::size_t>(n), {});
    for (int v = 0; v < n; ++v) {
      if (v == root_) continue;
      int p = parent_[v];
      if (p < 0 || p >= n || p == v) throw ParameterError("RootedTree: bad parent of " + std::to_string(v));
      children_[p].push_back(v);
    }
    // BFS from the root must reach everything exactly once.
    order_.reserve(static_cast<std::size_t>(n));
    depth_.assign(static_cast<std::size_t>(n), -1);
    order_.push_back(root_);
    depth_[root_] = 0;
    for (std::size_t i = 0; i < order_.size(); ++i)
      for (int c : children_[order_[i]]) {
        if (depth_[c] >= 0) throw ParameterError("RootedTree: cycle");
        depth_[c] = depth_[order_[i]] + 1;
        order_.push_back(c);
      }
    if (static_cast<int>(order_.size()) != n) throw ParameterError("RootedTree: not connected");
  }

  int vertex_count() const { return static_cast<int>(parent_.size()); }
  int edge_count() const { return std::max(0, vertex_count() - 1); }
  int root() const { return root_; }
  int parent(int v) const { return parent_[v]; }
  const std::vector<int>& parents() const { return parent_; }
  const std::vector<int>& children(int v) const { return children_[v]; }
  int depth(int v) const { return depth_[v]; }
  // Vertices in BFS order from the root (parents before children).
  const std::vector<int>& bfs_order() const { return order_; }

  int degree(int v) const { return static_cast<int>(children_[v].size()) + (parent_[v] >= 0 ? 1 : 0); }
  int max_degree() const {
    int d = 0;
    for (int v = 0; v < vertex_count(); ++v) d = std::max(d, degree(v));
    return d;
  }
  VertexSet neighbors(int v) const {
    VertexSet out = children_[v];
    if (parent_[v] >= 0) out.push_back(parent_[v]);
    return out;
  }
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (int v = 0; v < vertex_count(); ++v)
      if (parent_[v] >= 0) out.emplace_back(v, parent_[v]);
    return out;
  }

 private:
  std::vector<int> parent_;
  int root_ = -1;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
  std::vector<int> depth_;
};

// Rooted spanning tree of a connected acyclic graph.
inline RootedTree tree_from_graph(const Graph& g, int root) {
  int n = g.vertex_count();
  if (g.edge_count() != n - 1) throw ParameterError("tree_from_graph: edge count is not n - 1");
  std::vector<int> parent(static_cast<std::size_t>(n), -2);
  parent[root] = -1;
  std::vector<int> q{root};
  for (std::size_t i = 0; i < q.size(); ++i)
    for (Vertex u : g.neighbors(q[i]))
      if (parent[u] == -2) {
        parent[u] = q[i];
        q.push_back(u);
      }
  if (static_cast<int>(q.size()) != n) throw ParameterError("tree_from_graph: graph not connected");
  return RootedTree(parent, root);
}

inline RootedTree path_tree(int n) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) parent[v] = v - 1;
  return RootedTree(parent, 0);
}

// Uniform attachment with a degree cap: vertex i attaches to a uniformly
// random earlier vertex that still has spare degree.
inline RootedTree random_tree(int n, int max_degree, std::uint64_t seed) {
  if (n < 1 || max_degree < 1 || (n > 2 && max_degree < 2)) throw ParameterError("random_tree: bad parameters");
  Rng rng = make_rng(seed);
  std::vector<int> parent(static_cast<std::size_t>(n), -1), deg(static_cast<std::size_t>(n), 0);
  std::vector<int> open{0};
  for (int v = 1; v < n; ++v) {
    std::size_t k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(open.size()) - 1));
    int p = open[k];
    parent[v] = p;
    ++deg[p];
    ++deg[v];
    if (deg[p] >= max_degree) {
      open[k] = open.back();
      open.pop_back();
    }
    if (deg[v] < max_degree) open.push_back(v);
  }
  return RootedTree(parent, 0);
}

// Parity classes of the tree as seen from x; x lands in the first class.
inline std::pair<VertexSet, VertexSet> bipartition(const RootedTree& t, int x) {
  int n = t.vertex_count();
  if (x < 0 || x >= n) throw ParameterError("bipartition: vertex outside tree");
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  dist[x] = 0;
  std::vector<int> q{x};
  for (std::size_t i = 0; i < q.size(); ++i)
    for (int u : t.neighbors(q[i]))
      if (dist[u] < 0) {
        dist[u] = dist[q[i]] + 1;
        q.push_back(u);
      }
  std::pair<VertexSet, VertexSet> out;
  for (int v = 0; v < n; ++v) (dist[v] % 2 == 0 ? out.first : out.second).push_back(v);
  return out;
}

struct Piece {
  int root = -1;
  VertexSet vertices;  // sorted
};

struct SubtreeDecomposition {
  int t = 0;
  std::vector<Piece> pieces;
  std::vector<int> piece_of;  // vertex -> index into pieces
};

// Bottom-up greedy cut: a vertex whose uncut subtree weight reaches t becomes
// the root of a piece. An undersized remainder at the root is merged with
// one of the pieces hanging from it.
inline SubtreeDecomposition partition_subtrees(const RootedTree& tree, int t) {
  if (t < 1) throw ParameterError("partition_subtrees: t must be >= 1");
  int n = tree.vertex_count();
  if (n == 0) throw ParameterError("partition_subtrees: empty tree");
  SubtreeDecomposition dec;
  dec.t = t;
  dec.piece_of.assign(static_cast<std::size_t>(n), -1);
  int delta = std::max(1, tree.max_degree());
  if (n <= 2 * delta * t) {
    dec.pieces.push_back({tree.root(), iota_set(n)});
    std::fill(dec.piece_of.begin(), dec.piece_of.end(), 0);
    return dec;
  }
  std::vector<int> pending(static_cast<std::size_t>(n), 0);
  const auto& order = tree.bfs_order();
  auto collect = [&](int x, int id) {
    Piece pc;
    pc.root = x;
    std::vector<int> stack{x};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      dec.piece_of[v] = id;
      pc.vertices.push_back(v);
      for (int c : tree.children(v))
        if (dec.piece_of[c] < 0) stack.push_back(c);
    }
    std::sort(pc.vertices.begin(), pc.vertices.end());
    return pc;
  };
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int x = *it;
    pending[x] = 1;
    for (int c : tree.children(x))
      if (dec.piece_of[c] < 0) pending[x] += pending[c];
    if (pending[x] >= t) {
      int id = static_cast<int>(dec.pieces.size());
      dec.pieces.push_back(collect(x, id));
    }
  }
  int root = tree.root();
  if (dec.piece_of[root] < 0) {
    // Remainder R holds the root; merge it with the smallest piece whose
    // root hangs off R. The result keeps the tree root as its root.
    int best = -1;
    for (int v = 0; v < n; ++v) {
      int p = tree.parent(v);
      if (p >= 0 && dec.piece_of[p] < 0 && dec.piece_of[v] >= 0 && dec.pieces[dec.piece_of[v]].root == v) {
        int id = dec.piece_of[v];
        if (best < 0 || dec.pieces[id].vertices.size() < dec.pieces[best].vertices.size()) best = id;
      }
    }
    if (best < 0) throw InternalError("partition_subtrees: remainder has no adjacent piece");
    Piece rem = collect(root, best);
    Piece& target = dec.pieces[best];
    target.vertices.insert(target.vertices.end(), rem.vertices.begin(), rem.vertices.end());
    std::sort(target.vertices.begin(), target.vertices.end());
    target.root = root;
  }
  return dec;
}

struct TreeSplit {
  int r = 0;                              // number of slot indices
  std::vector<int> piece_depth;           // distance from the piece root inside the piece
  std::vector<int> piece_of;              // vertex -> piece
  std::vector<int> piece_roots;           // piece -> root
  std::vector<char> in_connector;         // vertex -> in C_T
  std::array<VertexSet, 3> layers;        // C^0, C^1, C^2
  VertexSet connector, bulk;              // C_T, F_T
  std::vector<std::pair<int, int>> slot_of_piece;  // piece -> (s, i); A side goes to X_i
  std::vector<std::array<VertexSet, 2>> slot_classes;  // s -> {X_0, X_1}
  std::vector<std::pair<int, int>> slot_of_vertex;     // bulk vertex -> (s, class), (-1,-1) otherwise

  bool in_a_side(int v) const { return piece_depth[v] % 2 == 0; }
};

inline TreeSplit split_connector(const RootedTree& tree, const SubtreeDecomposition& dec) {
  int n = tree.vertex_count();
  TreeSplit sp;
  sp.piece_of = dec.piece_of;
  sp.piece_depth.assign(static_cast<std::size_t>(n), -1);
  sp.in_connector.assign(static_cast<std::size_t>(n), 0);
  for (const auto& pc : dec.pieces) sp.piece_roots.push_back(pc.root);
  for (int v : tree.bfs_order()) {
    int pid = dec.piece_of[v];
    if (pid < 0) throw InternalError("split_connector: vertex outside every piece");
    if (dec.pieces[pid].root == v) {
      sp.piece_depth[v] = 0;
    } else {
      int p = tree.parent(v);
      if (p < 0 || dec.piece_of[p] != pid) throw InternalError("split_connector: piece not rooted at its root");
      sp.piece_depth[v] = sp.piece_depth[p] + 1;
    }
    if (sp.piece_depth[v] <= 2) {
      sp.in_connector[v] = 1;
      sp.layers[sp.piece_depth[v]].push_back(v);
    }
  }
  for (int v = 0; v < n; ++v) (sp.in_connector[v] ? sp.connector : sp.bulk).push_back(v);
  for (auto& l : sp.layers) std::sort(l.begin(), l.end());
  // A C^1 vertex has no bulk neighbour; a C^0 vertex's only possible bulk
  // neighbour is its parent.
  for (int v : sp.layers[1])
    for (int u : tree.neighbors(v))
      if (!sp.in_connector[u]) throw InternalError("split_connector: C^1 vertex with a bulk neighbour");
  for (int v : sp.layers[0])
    for (int c : tree.children(v))
      if (!sp.in_connector[c]) throw InternalError("split_connector: C^0 vertex with a bulk child");
  return sp;
}

constexpr int kSlotRetryBudget = 50;

struct SlotWindow {
  double target = 0;  // expected class size
  double slack = 0;   // allowed deviation
};

// Class-size target used by assign_slots: bulk vertices spread over 2r
// classes, with deviation epsilon * n_ref.
inline SlotWindow slot_window(const TreeSplit& sp, int r, double epsilon, double n_ref) {
  return {static_cast<double>(sp.bulk.size()) / (2.0 * r), epsilon * n_ref};
}

namespace detail {

inline void fill_slot_classes(TreeSplit& sp, int r) {
  sp.r = r;
  sp.slot_classes.assign(static_cast<std::size_t>(r), {});
  sp.slot_of_vertex.assign(sp.piece_depth.size(), {-1, -1});
  for (int v : sp.bulk) {
    auto [s, i] = sp.slot_of_piece[sp.piece_of[v]];
    int cls = sp.in_a_side(v) ? i : 1 - i;
    sp.slot_classes[s][cls].push_back(v);
    sp.slot_of_vertex[v] = {s, cls};
  }
}

inline double worst_deviation(const std::vector<std::array<long long, 2>>& sizes, double target) {
  double w = 0;
  for (const auto& c : sizes)
    for (long long x : c) w = std::max(w, std::abs(static_cast<double>(x) - target));
  return w;
}

// Single-piece moves that lower the worst deviation (then the squared
// deviation) until no move helps.
inline void relocate_pieces(std::vector<std::pair<int, int>>& slot, std::vector<std::array<long long, 2>>& sizes,
                            const std::vector<std::array<long long, 2>>& contrib, int r, double target) {
  auto score = [&]() {
    double sq = 0;
    for (const auto& c : sizes)
      for (long long x : c) sq += (static_cast<double>(x) - target) * (static_cast<double>(x) - target);
    return std::pair(worst_deviation(sizes, target), sq);
  };
  auto apply = [&](std::size_t p, int sign) {
    sizes[slot[p].first][slot[p].second] += sign * contrib[p][0];
    sizes[slot[p].first][1 - slot[p].second] += sign * contrib[p][1];
  };
  auto current = score();
  for (int pass = 0; pass < 50; ++pass) {
    bool improved = false;
    for (std::size_t p = 0; p < slot.size(); ++p) {
      auto keep = slot[p];
      apply(p, -1);
      auto best = keep;
      auto best_score = current;
      for (int s = 0; s < r; ++s)
        for (int i = 0; i < 2; ++i) {
          slot[p] = {s, i};
          apply(p, +1);
          auto sc = score();
          if (sc.first < best_score.first - 1e-9 ||
              (sc.first < best_score.first + 1e-9 && sc.second < best_score.second - 1e-9)) {
            best_score = sc;
            best = slot[p];
          }
          apply(p, -1);
        }
      slot[p] = best;
      apply(p, +1);
      if (best != keep) {
        current = best_score;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

}  // namespace detail

// Draws (s, i) per piece; the A side of a piece's bulk goes to X_i^s and the
// B side to X_{1-i}^s. The first half of the budget uses independent uniform
// draws; the second half uses a randomized greedy balancer (largest piece
// first, best-fitting class pair, random tie-break) followed by single-piece
// relocations.
inline TreeSplit assign_slots(TreeSplit sp, int r, double epsilon, double n_ref, std::uint64_t seed,
                              int budget = kSlotRetryBudget) {
  if (r < 1) throw ParameterError("assign_slots: r must be >= 1");
  std::size_t np = sp.piece_roots.size();
  std::vector<std::array<long long, 2>> contrib(np, {0, 0});  // bulk sizes of (A, B) sides per piece
  for (int v : sp.bulk) ++contrib[sp.piece_of[v]][sp.in_a_side(v) ? 0 : 1];
  SlotWindow win = slot_window(sp, r, epsilon, n_ref);
  double best_dev = 1e18;
  for (int attempt = 0; attempt < budget; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    std::vector<std::pair<int, int>> slot(np);
    std::vector<std::array<long long, 2>> sizes(static_cast<std::size_t>(r), {0, 0});
    if (attempt < budget / 2) {
      for (std::size_t p = 0; p < np; ++p) {
        slot[p] = {static_cast<int>(uniform_int(rng, 0, r - 1)), static_cast<int>(uniform_int(rng, 0, 1))};
        sizes[slot[p].first][slot[p].second] += contrib[p][0];
        sizes[slot[p].first][1 - slot[p].second] += contrib[p][1];
      }
    } else {
      std::vector<std::size_t> order(np);
      for (std::size_t p = 0; p < np; ++p) order[p] = p;
      shuffle(order, rng);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return contrib[a][0] + contrib[a][1] > contrib[b][0] + contrib[b][1];
      });
      for (std::size_t p : order) {
        double best = 1e18;
        std::vector<std::pair<int, int>> ties;
        for (int s = 0; s < r; ++s)
          for (int i = 0; i < 2; ++i) {
            // Fill the emptier classes first: score is the larger resulting size.
            double score = static_cast<double>(std::max(sizes[s][i] + contrib[p][0], sizes[s][1 - i] + contrib[p][1]));
            if (score < best - 1e-9) {
              best = score;
              ties.assign(1, {s, i});
            } else if (score < best + 1e-9) {
              ties.emplace_back(s, i);
            }
          }
        slot[p] = ties[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(ties.size()) - 1))];
        sizes[slot[p].first][slot[p].second] += contrib[p][0];
        sizes[slot[p].first][1 - slot[p].second] += contrib[p][1];
      }
      detail::relocate_pieces(slot, sizes, contrib, r, win.target);
    }
    double dev = detail::worst_deviation(sizes, win.target);
    best_dev = std::min(best_dev, dev);
    if (dev <= win.slack + 1e-9) {
      sp.slot_of_piece = std::move(slot);
      detail::fill_slot_classes(sp, r);
      return sp;
    }
  }
  std::ostringstream msg;
  msg << "assign_slots: best class-size deviation " << best_dev << " exceeds window " << win.slack << " around "
      << win.target;
  throw ProbabilisticFailure(msg.str(), budget);
}

// ---- text serialization: "n root" then n-1 lines "child parent" ----

inline void write_tree(std::ostream& os, const RootedTree& t) {
  os << t.vertex_count() << ' ' << t.root() << '\n';
  for (int v = 0; v < t.vertex_count(); ++v)
    if (t.parent(v) >= 0) os << v << ' ' << t.parent(v) << '\n';
}

inline RootedTree read_tree(std::istream& is) {
  long long n, root;
  if (!(is >> n >> root) || n < 1) throw IoError("tree header must be 'n root'");
  if (root < 0 || root >= n) throw IoError("tree root out of range");
  std::vector<int> parent(static_cast<std::size_t>(n), -2);
  parent[root] = -1;
  for (long long i = 0; i + 1 < n; ++i) {
    long long c, p;
    if (!(is >> c >> p)) throw IoError("truncated tree file");
    if (c < 0 || c >= n || p < 0 || p >= n || parent[c] != -2) throw IoError("bad tree line");
    parent[c] = static_cast<int>(p);
  }
  try {
    return RootedTree(parent, static_cast<int>(root));
  } catch (const ParameterError& e) {
    throw IoError(std::string("invalid tree: ") + e.what());
  }
}

}  // namespace treepack
