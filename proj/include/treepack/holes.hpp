#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "treepack/graph.hpp"

namespace treepack {

constexpr int kExactThreshold = 14;

enum class HoleStatus { found, none, unknown };

inline const char* to_string(HoleStatus s) {
  switch (s) {
    case HoleStatus::found: return "found";
    case HoleStatus::none: return "none";
    default: return "unknown";
  }
}

struct HoleQuery {
  int s = 0;
  int t = 0;
  HoleStatus status = HoleStatus::unknown;
  std::optional<std::pair<VertexSet, VertexSet>> witness;

  bool exists() const { return status == HoleStatus::found; }
};

// True iff (S, T) is an (|S|, |T|)-bipartite hole of g.
inline bool is_hole(const Graph& g, const VertexSet& S, const VertexSet& T) {
  Bits ms(g.vertex_count(), S);
  for (Vertex v : T) {
    if (ms.test(v)) return false;
    if (g.row(v).intersects(ms)) return false;
  }
  return true;
}

namespace detail {

// Branch and bound over S in increasing vertex order; `cand` holds the
// common non-neighbourhood of S outside S, i.e. the vertices T may use.
inline bool hole_search(const Graph& g, int need_s, int t, int next, VertexSet& S, const Bits& cand,
                        VertexSet& T_out) {
  if (cand.count() < t) return false;
  if (need_s == 0) {
    VertexSet c = cand.members();
    T_out.assign(c.begin(), c.begin() + t);
    return true;
  }
  int n = g.vertex_count();
  for (int v = next; v <= n - need_s; ++v) {
    Bits c2 = cand;
    c2.subtract(g.row(v));
    c2.reset(v);
    if (c2.count() < t) continue;
    S.push_back(v);
    if (hole_search(g, need_s - 1, t, v + 1, S, c2, T_out)) return true;
    S.pop_back();
  }
  return false;
}

// Greedy randomized attempt: grow S keeping the common non-neighbourhood
// large, then take T inside it.
inline bool greedy_hole_attempt(const Graph& g, int s, int t, Rng& rng, VertexSet& S, VertexSet& T) {
  int n = g.vertex_count();
  S.clear();
  T.clear();
  Bits inS(n);
  Bits cand(n);
  for (int v = 0; v < n; ++v) cand.set(v);
  const int kProbe = 24;
  while (static_cast<int>(S.size()) < s) {
    Vertex best = -1;
    int best_keep = -1;
    for (int k = 0; k < kProbe; ++k) {
      Vertex c = static_cast<Vertex>(uniform_int(rng, 0, n - 1));
      if (inS.test(c)) continue;
      Bits tmp = cand;
      tmp.subtract(g.row(c));
      tmp.reset(c);
      int keep = tmp.count();
      if (keep > best_keep) {
        best_keep = keep;
        best = c;
      }
    }
    if (best < 0) {
      for (Vertex c = 0; c < n; ++c)
        if (!inS.test(c)) {
          best = c;
          break;
        }
    }
    S.push_back(best);
    inS.set(best);
    cand.subtract(g.row(best));
    cand.reset(best);
    if (cand.count() < t) return false;
  }
  VertexSet c = cand.members();
  T = sample_without_replacement(c, static_cast<std::size_t>(t), rng);
  return true;
}

}  // namespace detail

// Exact for vertex_count <= kExactThreshold; otherwise a bounded randomized
// search whose negative answer is reported as `unknown`.
inline HoleQuery bipartite_hole_exists(const Graph& g, int s, int t, std::uint64_t seed = 0,
                                       int random_attempts = 200) {
  int n = g.vertex_count();
  if (s < 0 || t < 0 || s + t > n) throw ParameterError("bipartite_hole_exists: need 0 <= s, t and s + t <= n");
  HoleQuery q{s, t, HoleStatus::none, std::nullopt};
  if (s == 0 || t == 0) {
    VertexSet a = iota_set(s), b = iota_set(t, s);
    q.status = HoleStatus::found;
    q.witness = std::make_pair(a, b);
    return q;
  }
  bool swapped = s > t;
  int ss = swapped ? t : s, tt = swapped ? s : t;
  VertexSet S, T;
  bool ok = false;
  if (n <= kExactThreshold) {
    Bits all(n);
    for (int v = 0; v < n; ++v) all.set(v);
    ok = detail::hole_search(g, ss, tt, 0, S, all, T);
    q.status = ok ? HoleStatus::found : HoleStatus::none;
  } else {
    Rng rng = make_rng(seed);
    for (int a = 0; a < random_attempts && !ok; ++a) ok = detail::greedy_hole_attempt(g, ss, tt, rng, S, T);
    q.status = ok ? HoleStatus::found : HoleStatus::unknown;
  }
  if (ok) q.witness = swapped ? std::make_pair(T, S) : std::make_pair(S, T);
  return q;
}

// Largest r such that every split s + t = r admits an (s, t)-hole. Splits
// with an empty side count as holes.
inline int bi_independence_exact(const Graph& g, int threshold = kExactThreshold) {
  int n = g.vertex_count();
  if (n > threshold)
    throw SizeError("bi_independence_exact: " + std::to_string(n) + " vertices exceeds threshold " +
                    std::to_string(threshold) + "; use bi_independence_upper_sample");
  int best = 0;
  for (int r = 1; r <= n; ++r) {
    bool all = true;
    for (int s = 1; s <= r / 2 && all; ++s) all = bipartite_hole_exists(g, s, r - s).exists();
    if (!all) break;
    best = r;
  }
  return best;
}

enum class SampleMode { uniform, greedy };

struct SampleVerdict {
  bool refuted = false;  // no trial produced a hole: evidence that alpha~(g) < r
  int trials = 0;
  std::optional<std::pair<VertexSet, VertexSet>> witness;
};

// Monte-Carlo evidence for alpha~(g) < r using (ceil(r/2), floor(r/2)) pairs.
// `uniform` draws disjoint pairs uniformly; `greedy` grows S to keep its
// common non-neighbourhood large, which is a strictly harder test to refute.
inline SampleVerdict bi_independence_upper_sample(const Graph& g, int r, int trials, std::uint64_t seed,
                                                  SampleMode mode = SampleMode::greedy) {
  int n = g.vertex_count();
  if (r < 0 || r > n) throw ParameterError("bi_independence_upper_sample: r outside [0, n]");
  if (trials < 1) throw ParameterError("bi_independence_upper_sample: trials must be >= 1");
  int s = (r + 1) / 2, t = r / 2;
  SampleVerdict out;
  out.trials = trials;
  Rng rng = make_rng(seed);
  VertexSet all = iota_set(n);
  for (int k = 0; k < trials; ++k) {
    VertexSet S, T;
    bool hole = false;
    if (mode == SampleMode::uniform) {
      VertexSet pick = sample_without_replacement(all, static_cast<std::size_t>(s + t), rng);
      S.assign(pick.begin(), pick.begin() + s);
      T.assign(pick.begin() + s, pick.end());
      hole = is_hole(g, S, T);
    } else {
      hole = detail::greedy_hole_attempt(g, s, t, rng, S, T);
    }
    if (hole) {
      out.witness = std::make_pair(S, T);
      return out;
    }
  }
  out.refuted = true;
  return out;
}

// Vertices w in W with fewer than eta^{-1/2} neighbours in W2.
inline VertexSet highly_connecting_check(const Graph& g, const VertexSet& W, const VertexSet& W2, double eta) {
  int n = g.vertex_count();
  if (eta <= 0 || eta >= 1) throw ParameterError("highly_connecting_check: eta must lie in (0,1)");
  double need = 2.0 * std::cbrt(eta) * n;
  if (static_cast<double>(W.size()) < need || static_cast<double>(W2.size()) < need)
    throw ParameterError("highly_connecting_check: |W|, |W2| must be >= 2 eta^{1/3} n");
  double thr = 1.0 / std::sqrt(eta);
  Bits m2(n, W2);
  VertexSet bad;
  for (Vertex w : W)
    if (g.degree_into(w, m2) < thr) bad.push_back(w);
  return bad;
}

constexpr int kRetryBudget = 20;

// Keeps each edge with probability xi/2, retrying with counter-mixed seeds
// until the maximum degree is at most xi * n.
inline Graph sparsify_preserving_holes(const Graph& g, double xi, double eta, std::uint64_t seed,
                                       int budget = kRetryBudget) {
  (void)eta;  // the hole hypothesis on g is the caller's responsibility
  if (xi < 0 || xi > 1) throw ParameterError("sparsify_preserving_holes: xi outside [0,1]");
  int n = g.vertex_count();
  auto edges = g.edges();
  int worst = 0;
  for (int attempt = 0; attempt < budget; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    Graph h(n);
    for (auto [u, v] : edges)
      if (bernoulli(rng, xi / 2)) h.add_edge(u, v);
    int d = h.max_degree();
    if (d <= xi * n) return h;
    worst = d;
  }
  throw ProbabilisticFailure("sparsify_preserving_holes: max degree " + std::to_string(worst) + " > xi n", budget);
}

}  // namespace treepack
