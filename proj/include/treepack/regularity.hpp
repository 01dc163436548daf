#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "treepack/graph.hpp"

namespace treepack {

struct BipartitePairView {
  const Graph* graph = nullptr;
  VertexSet side_a;
  VertexSet side_b;

  BipartitePairView() = default;
  BipartitePairView(const Graph& g, VertexSet a, VertexSet b) : graph(&g), side_a(std::move(a)), side_b(std::move(b)) {
    Bits ma(g.vertex_count(), side_a);
    for (Vertex v : side_b)
      if (ma.test(v)) throw ParameterError("pair sides must be disjoint");
  }
};

// e(A,B) / (|A||B|) kept as an exact fraction.
struct Density {
  long long edges = 0;
  long long cells = 1;
  double value() const { return static_cast<double>(edges) / static_cast<double>(cells); }
};

inline Density density(const BipartitePairView& p) {
  if (p.side_a.empty() || p.side_b.empty()) throw ParameterError("density: empty side");
  return {edges_between(*p.graph, p.side_a, p.side_b),
          static_cast<long long>(p.side_a.size()) * static_cast<long long>(p.side_b.size())};
}

enum class RegularityStatus { regular, irregular, estimated_regular };

inline const char* to_string(RegularityStatus s) {
  switch (s) {
    case RegularityStatus::regular: return "regular";
    case RegularityStatus::irregular: return "irregular-with-witness";
    default: return "estimated-regular";
  }
}

struct RegularityVerdict {
  double epsilon = 0;
  double density = 0;
  RegularityStatus status = RegularityStatus::regular;
  std::optional<std::pair<VertexSet, VertexSet>> witness;

  bool ok() const { return status != RegularityStatus::irregular; }
};

struct RegularityMode {
  bool exhaustive = true;
  int trials = 500;
  std::uint64_t seed = 0;

  static RegularityMode exact() { return {true, 0, 0}; }
  static RegularityMode sampled(int k = 500, std::uint64_t seed = 0) { return {false, k, seed}; }
};

// Smallest subset size qualifying as "at least eps * size".
inline int min_subset_size(double eps, std::size_t size) {
  int k = static_cast<int>(std::ceil(eps * static_cast<double>(size) - 1e-9));
  return std::max(k, 1);
}

constexpr int kExhaustiveSideLimit = 16;

inline RegularityVerdict regularity_test(const BipartitePairView& p, double eps, RegularityMode mode) {
  Density den = density(p);
  RegularityVerdict out{eps, den.value(), RegularityStatus::regular, std::nullopt};
  const Graph& g = *p.graph;
  const auto& A = p.side_a;
  const auto& B = p.side_b;
  int na = static_cast<int>(A.size()), nb = static_cast<int>(B.size());
  int ka = min_subset_size(eps, A.size()), kb = min_subset_size(eps, B.size());
  double d = den.value();

  if (mode.exhaustive) {
    if (na > kExhaustiveSideLimit || nb > kExhaustiveSideLimit)
      throw SizeError("regularity_test: exhaustive mode needs sides <= 16");
    // For each A', the extreme densities over |B'| = k come from the k largest
    // or smallest counts |N(b) ∩ A'|.
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(nb), std::vector<int>(static_cast<std::size_t>(na)));
    for (int j = 0; j < nb; ++j)
      for (int i = 0; i < na; ++i) adj[j][i] = g.has_edge(B[j], A[i]) ? 1 : 0;
    std::vector<std::pair<int, int>> cnt(static_cast<std::size_t>(nb));
    for (std::uint32_t mask = 1; mask < (1u << na); ++mask) {
      int sa = std::popcount(mask);
      if (sa < ka) continue;
      for (int j = 0; j < nb; ++j) {
        int c = 0;
        for (int i = 0; i < na; ++i)
          if ((mask >> i) & 1u) c += adj[j][i];
        cnt[j] = {c, j};
      }
      std::sort(cnt.begin(), cnt.end());
      for (int k = kb; k <= nb; ++k) {
        long long lo = 0, hi = 0;
        for (int x = 0; x < k; ++x) {
          lo += cnt[x].first;
          hi += cnt[nb - 1 - x].first;
        }
        double cells = static_cast<double>(sa) * k;
        bool low_bad = std::abs(static_cast<double>(lo) / cells - d) >= eps;
        bool high_bad = std::abs(static_cast<double>(hi) / cells - d) >= eps;
        if (low_bad || high_bad) {
          VertexSet wa, wb;
          for (int i = 0; i < na; ++i)
            if ((mask >> i) & 1u) wa.push_back(A[i]);
          for (int x = 0; x < k; ++x) wb.push_back(B[cnt[low_bad ? x : nb - 1 - x].second]);
          out.status = RegularityStatus::irregular;
          out.witness = std::make_pair(wa, wb);
          return out;
        }
      }
    }
    return out;
  }

  // Subset sizes are drawn uniformly from [ceil(eps |side|), |side|].
  Rng rng = make_rng(mode.seed);
  for (int trial = 0; trial < mode.trials; ++trial) {
    auto sa = static_cast<std::size_t>(uniform_int(rng, ka, na));
    auto sb = static_cast<std::size_t>(uniform_int(rng, kb, nb));
    VertexSet wa = sample_without_replacement(A, sa, rng);
    VertexSet wb = sample_without_replacement(B, sb, rng);
    double dd = static_cast<double>(edges_between(g, wa, wb)) / (static_cast<double>(sa) * static_cast<double>(sb));
    if (std::abs(dd - d) >= eps) {
      out.status = RegularityStatus::irregular;
      out.witness = std::make_pair(wa, wb);
      return out;
    }
  }
  out.status = RegularityStatus::estimated_regular;
  return out;
}

// Vertices of A with at least (d - eps^{1/2})|B_sub| neighbours in B_sub.
inline VertexSet robust_degree_filter(const BipartitePairView& p, double eps, double d, const VertexSet& B_sub) {
  double need = std::cbrt(eps) * static_cast<double>(p.side_b.size());
  if (static_cast<double>(B_sub.size()) < need - 1e-9)
    throw ParameterError("robust_degree_filter: |B_sub| < eps^{1/3} |B|");
  Bits mb(p.graph->vertex_count(), B_sub);
  double thr = (d - std::sqrt(eps)) * static_cast<double>(B_sub.size());
  VertexSet out;
  for (Vertex u : p.side_a)
    if (p.graph->degree_into(u, mb) >= thr) out.push_back(u);
  return out;
}

// True if every degree lies in (d ± tol) times the opposite side.
inline bool super_regular_degrees(const Graph& g, const VertexSet& A, const VertexSet& B, double d, double tol) {
  Bits ma(g.vertex_count(), A), mb(g.vertex_count(), B);
  for (Vertex a : A) {
    double x = g.degree_into(a, mb);
    if (x < (d - tol) * B.size() || x > (d + tol) * B.size()) return false;
  }
  for (Vertex b : B) {
    double x = g.degree_into(b, ma);
    if (x < (d - tol) * A.size() || x > (d + tol) * A.size()) return false;
  }
  return true;
}

struct TrimResult {
  VertexSet side_a;
  VertexSet side_b;
  int removed_a = 0;
  int removed_b = 0;
  bool degrees_within = false;  // every degree is (d ± 3 eps) times the other side
};

// Repeatedly drops vertices with fewer than (d - 2 eps) times the current
// opposite side as neighbours.
inline TrimResult super_regular_trim(const BipartitePairView& p, double eps, double d) {
  const Graph& g = *p.graph;
  int n = g.vertex_count();
  Bits ma(n, p.side_a), mb(n, p.side_b);
  VertexSet A = p.side_a, B = p.side_b;
  bool changed = true;
  while (changed) {
    changed = false;
    double thr_a = (d - 2 * eps) * static_cast<double>(B.size());
    VertexSet keepA;
    for (Vertex a : A) {
      if (g.degree_into(a, mb) < thr_a) {
        ma.reset(a);
        changed = true;
      } else {
        keepA.push_back(a);
      }
    }
    A.swap(keepA);
    double thr_b = (d - 2 * eps) * static_cast<double>(A.size());
    VertexSet keepB;
    for (Vertex b : B) {
      if (g.degree_into(b, ma) < thr_b) {
        mb.reset(b);
        changed = true;
      } else {
        keepB.push_back(b);
      }
    }
    B.swap(keepB);
  }
  TrimResult r;
  r.removed_a = static_cast<int>(p.side_a.size() - A.size());
  r.removed_b = static_cast<int>(p.side_b.size() - B.size());
  if (r.removed_a > 2 * eps * static_cast<double>(p.side_a.size()) + 1e-9 ||
      r.removed_b > 2 * eps * static_cast<double>(p.side_b.size()) + 1e-9)
    throw RegularityViolation("super_regular_trim: removed " + std::to_string(r.removed_a) + "/" +
                              std::to_string(r.removed_b) + " vertices, more than a 2 eps fraction");
  r.side_a = std::move(A);
  r.side_b = std::move(B);
  r.degrees_within = !r.side_a.empty() && !r.side_b.empty() &&
                     super_regular_degrees(g, r.side_a, r.side_b, d, 3 * eps);
  return r;
}

struct EdgeSplit {
  std::vector<std::vector<Edge>> classes;
  std::vector<Edge> leftover;
};

// Each crossing edge goes to class i with probability p_i, else to leftover.
inline EdgeSplit split_edges(const BipartitePairView& p, const std::vector<double>& probabilities, std::uint64_t seed) {
  double total = 0;
  for (double x : probabilities) {
    if (x < 0) throw ParameterError("split_edges: negative probability");
    total += x;
  }
  if (total > 1 + 1e-9) throw ParameterError("split_edges: probabilities sum above 1");
  EdgeSplit out;
  out.classes.resize(probabilities.size());
  Rng rng = make_rng(seed);
  Bits mb(p.graph->vertex_count(), p.side_b);
  for (Vertex a : p.side_a) {
    Bits r = p.graph->row(a);
    r &= mb;
    for (Vertex b : r.members()) {
      double u = uniform01(rng), acc = 0;
      std::size_t cls = probabilities.size();
      for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) {
          cls = i;
          break;
        }
      }
      (cls < out.classes.size() ? out.classes[cls] : out.leftover).push_back(make_edge(a, b));
    }
  }
  return out;
}

struct FourWaySplit {
  VertexSet a1, a2, b1, b2;
  int attempts = 0;
};

constexpr int kPartitionRetryBudget = 20;

// Random split of both sides into the requested sizes such that all four
// cross pairs pass the super-regular degree check at tolerance eps^{1/2}.
inline FourWaySplit partition_super_regular(const BipartitePairView& p, double eps, double d, int a1, int a2, int b1,
                                            int b2, std::uint64_t seed, int budget = kPartitionRetryBudget) {
  int na = static_cast<int>(p.side_a.size()), nb = static_cast<int>(p.side_b.size());
  if (a1 + a2 != na || b1 + b2 != nb) throw ParameterError("partition_super_regular: sizes do not add up");
  double floor_size = eps * std::max(na, nb);
  for (int x : {a1, a2, b1, b2})
    if (x < floor_size - 1e-9 || x <= 0) throw ParameterError("partition_super_regular: every part must be >= eps n");
  double tol = std::sqrt(eps);
  for (int attempt = 0; attempt < budget; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    VertexSet A = p.side_a, B = p.side_b;
    shuffle(A, rng);
    shuffle(B, rng);
    FourWaySplit s;
    s.a1.assign(A.begin(), A.begin() + a1);
    s.a2.assign(A.begin() + a1, A.end());
    s.b1.assign(B.begin(), B.begin() + b1);
    s.b2.assign(B.begin() + b1, B.end());
    for (auto* v : {&s.a1, &s.a2, &s.b1, &s.b2}) std::sort(v->begin(), v->end());
    const Graph& g = *p.graph;
    if (super_regular_degrees(g, s.a1, s.b1, d, tol) && super_regular_degrees(g, s.a1, s.b2, d, tol) &&
        super_regular_degrees(g, s.a2, s.b1, d, tol) && super_regular_degrees(g, s.a2, s.b2, d, tol)) {
      s.attempts = attempt + 1;
      return s;
    }
  }
  throw ProbabilisticFailure("partition_super_regular: no split passed the degree checks", budget);
}

// Removes `removed` from the pair and retests at tolerance eps^{1/2}.
inline RegularityVerdict remove_edges_check(const BipartitePairView& p, double eps, double d,
                                            const std::vector<Edge>& removed, RegularityMode mode) {
  (void)d;
  double budget = std::pow(eps, 10) * static_cast<double>(p.side_a.size()) * static_cast<double>(p.side_b.size());
  if (static_cast<double>(removed.size()) > budget + 1e-12)
    throw ParameterError("remove_edges_check: more than eps^10 |A||B| edges removed");
  Graph h = *p.graph;
  for (auto [u, v] : removed) h.remove_edge(u, v);
  BipartitePairView q(h, p.side_a, p.side_b);
  auto verdict = regularity_test(q, std::sqrt(eps), mode);
  verdict.epsilon = std::sqrt(eps);
  return verdict;
}

struct RegularPartition {
  std::vector<VertexSet> parts;
  VertexSet exceptional;
  // Upper-triangular per-pair data, indexed by (i, j) with i < j.
  struct PairInfo {
    int i, j;
    double density;
    RegularityVerdict verdict;
  };
  std::vector<PairInfo> pairs;
  long long internal_edges = 0;
};

// Heuristic stand-in for a regular partition: random equipartition, then
// best-partner swap sweeps that lower the number of edges inside parts, then a
// sampled regularity verdict for each pair.
inline RegularPartition regular_partition_heuristic(const Graph& g, int target_parts, double eps, std::uint64_t seed,
                                                    int swap_rounds = -1) {
  if (target_parts < 1) throw ParameterError("regular_partition_heuristic: target_parts >= 1");
  int n = g.vertex_count();
  RegularPartition out;
  int k = std::max(1, std::min(target_parts, n));
  if (n == 0) return out;
  Rng rng = make_rng(seed);
  VertexSet perm = iota_set(n);
  shuffle(perm, rng);
  int size = n / k;
  std::vector<int> part(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < k * size; ++i) part[perm[i]] = i / size;
  for (int i = k * size; i < n; ++i) out.exceptional.push_back(perm[i]);
  std::sort(out.exceptional.begin(), out.exceptional.end());

  // cnt[v][p]: neighbours of v in part p.
  std::vector<std::vector<int>> cnt(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(k), 0));
  for (int v = 0; v < n; ++v)
    for (Vertex u : g.neighbors(v))
      if (part[u] >= 0) ++cnt[v][part[u]];
  VertexSet members;
  for (int v = 0; v < n; ++v)
    if (part[v] >= 0) members.push_back(v);
  // Sweeps: for each u, the best partner v in another part; apply if the
  // swap lowers the number of internal edges.
  int sweeps = swap_rounds >= 0 ? swap_rounds : 50;
  for (int sweep = 0; sweep < sweeps && k > 1; ++sweep) {
    bool improved = false;
    VertexSet order = members;
    shuffle(order, rng);
    for (Vertex u : order) {
      int P = part[u];
      int best_gain = 0;
      Vertex best_v = -1;
      for (Vertex v : members) {
        int Q = part[v];
        if (Q == P) continue;
        int uv = g.has_edge(u, v) ? 1 : 0;
        int gain = cnt[u][P] + cnt[v][Q] - cnt[u][Q] - cnt[v][P] + 2 * uv;
        if (gain > best_gain) {
          best_gain = gain;
          best_v = v;
        }
      }
      if (best_v < 0) continue;
      Vertex v = best_v;
      int Q = part[v];
      for (Vertex w : g.neighbors(u)) {
        --cnt[w][P];
        ++cnt[w][Q];
      }
      for (Vertex w : g.neighbors(v)) {
        --cnt[w][Q];
        ++cnt[w][P];
      }
      part[u] = Q;
      part[v] = P;
      improved = true;
    }
    if (!improved) break;
  }
  out.parts.assign(static_cast<std::size_t>(k), {});
  for (int v = 0; v < n; ++v)
    if (part[v] >= 0) out.parts[part[v]].push_back(v);
  for (int v = 0; v < n; ++v)
    if (part[v] >= 0) out.internal_edges += cnt[v][part[v]];
  out.internal_edges /= 2;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      BipartitePairView pv(g, out.parts[i], out.parts[j]);
      auto verdict = regularity_test(pv, eps, RegularityMode::sampled(500, mix_seed(seed, 1000 + i * k + j)));
      out.pairs.push_back({i, j, verdict.density, verdict});
    }
  return out;
}

}  // namespace treepack
