#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "treepack/common.hpp"

namespace treepack {

constexpr int kMaxVertices = 1 << 16;

// Fixed-size bitset over [0, size).
class Bits {
 public:
  Bits() = default;
  explicit Bits(int size) : size_(size), w_(static_cast<std::size_t>((size + 63) / 64), 0) {}
  Bits(int size, const VertexSet& members) : Bits(size) {
    for (Vertex v : members) set(v);
  }

  int size() const { return size_; }
  void set(int i) { w_[static_cast<std::size_t>(i) >> 6] |= (1ULL << (i & 63)); }
  void reset(int i) { w_[static_cast<std::size_t>(i) >> 6] &= ~(1ULL << (i & 63)); }
  bool test(int i) const { return (w_[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1ULL; }
  void clear() { std::fill(w_.begin(), w_.end(), 0); }

  int count() const {
    int c = 0;
    for (auto x : w_) c += std::popcount(x);
    return c;
  }
  bool any() const {
    for (auto x : w_)
      if (x) return true;
    return false;
  }
  Bits& operator&=(const Bits& o) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] &= o.w_[i];
    return *this;
  }
  Bits& operator|=(const Bits& o) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] |= o.w_[i];
    return *this;
  }
  // this &= ~o
  Bits& subtract(const Bits& o) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] &= ~o.w_[i];
    return *this;
  }
  int count_and(const Bits& o) const {
    int c = 0;
    for (std::size_t i = 0; i < w_.size(); ++i) c += std::popcount(w_[i] & o.w_[i]);
    return c;
  }
  bool intersects(const Bits& o) const {
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & o.w_[i]) return true;
    return false;
  }
  VertexSet members() const {
    VertexSet out;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      std::uint64_t x = w_[i];
      while (x) {
        int b = std::countr_zero(x);
        out.push_back(static_cast<int>(i * 64) + b);
        x &= x - 1;
      }
    }
    return out;
  }
  const std::vector<std::uint64_t>& words() const { return w_; }
  std::vector<std::uint64_t>& words() { return w_; }
  bool operator==(const Bits& o) const { return size_ == o.size_ && w_ == o.w_; }

 private:
  int size_ = 0;
  std::vector<std::uint64_t> w_;
};

using Edge = std::pair<Vertex, Vertex>;

inline Edge make_edge(Vertex a, Vertex b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Undirected simple graph stored as adjacency bitset rows.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n) : n_(n) {
    if (n < 0 || n > kMaxVertices) throw ParameterError("vertex count out of range");
    rows_.assign(static_cast<std::size_t>(n), Bits(n));
  }

  int vertex_count() const { return n_; }

  void add_edge(Vertex u, Vertex v) {
    check(u);
    check(v);
    if (u == v) throw ParameterError("self-loop");
    if (!rows_[idx(u)].test(v)) ++m_;
    rows_[idx(u)].set(v);
    rows_[idx(v)].set(u);
  }
  void remove_edge(Vertex u, Vertex v) {
    if (!has_edge(u, v)) return;
    rows_[idx(u)].reset(v);
    rows_[idx(v)].reset(u);
    --m_;
  }
  bool has_edge(Vertex u, Vertex v) const { return u != v && rows_[idx(u)].test(v); }
  const Bits& row(Vertex v) const { return rows_[idx(v)]; }
  int degree(Vertex v) const { return rows_[idx(v)].count(); }
  int degree_into(Vertex v, const Bits& mask) const { return rows_[idx(v)].count_and(mask); }
  VertexSet neighbors(Vertex v) const { return rows_[idx(v)].members(); }
  long long edge_count() const { return m_; }

  int max_degree() const {
    int d = 0;
    for (int v = 0; v < n_; ++v) d = std::max(d, degree(v));
    return d;
  }

  // Edges with u < v in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(m_));
    for (int u = 0; u < n_; ++u)
      for (Vertex v : rows_[idx(u)].members())
        if (v > u) out.emplace_back(u, v);
    return out;
  }

  // Edge union with another graph on the same vertex set.
  Graph& merge(const Graph& o) {
    if (o.n_ != n_) throw ParameterError("merge: vertex counts differ");
    for (auto [u, v] : o.edges()) add_edge(u, v);
    return *this;
  }

  bool operator==(const Graph& o) const { return n_ == o.n_ && m_ == o.m_ && rows_ == o.rows_; }

 private:
  static std::size_t idx(Vertex v) { return static_cast<std::size_t>(v); }
  void check(Vertex v) const {
    if (v < 0 || v >= n_) throw ParameterError("vertex out of range: " + std::to_string(v));
  }

  int n_ = 0;
  long long m_ = 0;
  std::vector<Bits> rows_;
};

// Number of edges between disjoint sets a and b.
inline long long edges_between(const Graph& g, const VertexSet& a, const VertexSet& b) {
  Bits mb(g.vertex_count(), b);
  long long e = 0;
  for (Vertex u : a) e += g.degree_into(u, mb);
  return e;
}

inline Graph induced_bipartite(const Graph& g, const VertexSet& a, const VertexSet& b) {
  Graph h(g.vertex_count());
  Bits mb(g.vertex_count(), b);
  for (Vertex u : a) {
    Bits r = g.row(u);
    r &= mb;
    for (Vertex v : r.members()) h.add_edge(u, v);
  }
  return h;
}

inline Graph induced(const Graph& g, const VertexSet& s) {
  Graph h(g.vertex_count());
  Bits ms(g.vertex_count(), s);
  for (Vertex u : s) {
    Bits r = g.row(u);
    r &= ms;
    for (Vertex v : r.members())
      if (v > u) h.add_edge(u, v);
  }
  return h;
}

// ---- text serialization: "n m" then m lines "u v" with u < v ----

inline void write_graph(std::ostream& os, const Graph& g) {
  os << g.vertex_count() << ' ' << g.edge_count() << '\n';
  for (auto [u, v] : g.edges()) os << u << ' ' << v << '\n';
}

inline Graph read_graph(std::istream& is) {
  long long n = -1, m = -1;
  if (!(is >> n >> m) || n < 0 || m < 0) throw IoError("graph header must be 'n m'");
  if (n > kMaxVertices) throw IoError("graph too large");
  Graph g(static_cast<int>(n));
  for (long long i = 0; i < m; ++i) {
    long long u, v;
    if (!(is >> u >> v)) throw IoError("truncated edge list at line " + std::to_string(i + 2));
    if (u < 0 || v < 0 || u >= n || v >= n || u == v) throw IoError("bad edge at line " + std::to_string(i + 2));
    g.add_edge(static_cast<int>(u), static_cast<int>(v));
  }
  return g;
}

inline std::string graph_to_string(const Graph& g) {
  std::ostringstream os;
  write_graph(os, g);
  return os.str();
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_graph(in);
}

inline void save_graph(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_graph(out, g);
}

}  // namespace treepack
