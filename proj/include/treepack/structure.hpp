#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "treepack/generators.hpp"
#include "treepack/graph.hpp"
#include "treepack/regularity.hpp"

namespace treepack {

struct PairDensity {
  int i = 0, j = 0;
  double density = 0;
};

struct ReducedEdge {
  int i = 0, j = 0;  // part indices, i < j
  int label = 0;     // 0-based among the parallel copies of ij
};

// Multigraph on the parts: t_ij = floor(d_ij t) parallel edges per dense pair,
// each carrying a disjoint slice ("payload") of the crossing edges.
struct ReducedMultigraph {
  int t = 0;
  std::vector<VertexSet> parts;
  std::vector<ReducedEdge> edges;
  std::vector<std::vector<Edge>> payload;  // per reduced edge
  std::vector<double> pair_density;        // d_ij of the pair each edge came from
  std::vector<std::string> warnings;

  int part_count() const { return static_cast<int>(parts.size()); }

  int degree(int v) const {
    int d = 0;
    for (const auto& e : edges) d += (e.i == v) + (e.j == v);
    return d;
  }
  int max_degree() const {
    int d = 0;
    for (int v = 0; v < part_count(); ++v) d = std::max(d, degree(v));
    return d;
  }
  int max_multiplicity() const {
    std::map<std::pair<int, int>, int> m;
    int best = 0;
    for (const auto& e : edges) best = std::max(best, ++m[{e.i, e.j}]);
    return best;
  }
};

inline int parallel_count(double density, int t) {
  return static_cast<int>(std::floor(density * t + 1e-9));
}

inline ReducedMultigraph build_reduced(const Graph& g, const std::vector<VertexSet>& parts,
                                       const std::vector<PairDensity>& densities, int t, std::uint64_t seed) {
  if (t < 1) throw ParameterError("build_reduced: t must be >= 1");
  ReducedMultigraph rm;
  rm.t = t;
  rm.parts = parts;
  {
    Bits seen(g.vertex_count());
    for (const auto& p : parts)
      for (Vertex v : p) {
        if (seen.test(v)) throw ParameterError("build_reduced: parts overlap");
        seen.set(v);
      }
  }
  std::uint64_t counter = 0;
  for (const auto& pd : densities) {
    int i = std::min(pd.i, pd.j), j = std::max(pd.i, pd.j);
    if (i == j || i < 0 || j >= rm.part_count()) throw ParameterError("build_reduced: bad pair index");
    if (pd.density < 1.0 / t - 1e-12) {
      rm.warnings.push_back("pair " + std::to_string(i) + "-" + std::to_string(j) + " dropped: density " +
                            std::to_string(pd.density) + " < 1/t");
      continue;
    }
    int tij = parallel_count(pd.density, t);
    std::vector<double> probs(static_cast<std::size_t>(tij), 1.0 / (pd.density * t));
    BipartitePairView view(g, parts[i], parts[j]);
    auto split = split_edges(view, probs, mix_seed(seed, counter++));
    for (int l = 0; l < tij; ++l) {
      rm.edges.push_back({i, j, l});
      std::sort(split.classes[l].begin(), split.classes[l].end());
      rm.payload.push_back(std::move(split.classes[l]));
      rm.pair_density.push_back(pd.density);
    }
  }
  return rm;
}

// Pair densities taken from the partition's recorded pairs.
inline ReducedMultigraph build_reduced(const Graph& g, const RegularPartition& rp, int t, std::uint64_t seed) {
  std::vector<PairDensity> ds;
  for (const auto& p : rp.pairs) ds.push_back({p.i, p.j, p.density});
  return build_reduced(g, rp.parts, ds, t, seed);
}

// ---- edge colouring of the reduced multigraph ----

namespace detail {

class MultigraphColouring {
 public:
  MultigraphColouring(int n, const std::vector<ReducedEdge>& edges, int palette)
      : k_(palette), ends_(edges.size()), colour_(edges.size(), -1) {
    for (std::size_t e = 0; e < edges.size(); ++e) ends_[e] = {edges[e].i, edges[e].j};
    at_.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(k_), -1));
  }

  int colour(int e) const { return colour_[e]; }
  int palette() const { return k_; }

  // Colours edge e, growing the palette only if the fan and Kempe steps get stuck.
  void colour_edge(int e, Rng& rng) {
    for (int round = 0; round < 200; ++round) {
      if (try_fan(e, rng)) return;
    }
    add_colour();
    set(e, k_ - 1);
  }

 private:
  int other(int e, int v) const { return ends_[e].first == v ? ends_[e].second : ends_[e].first; }
  bool missing(int v, int c) const { return at_[v][c] < 0; }
  void set(int e, int c) {
    colour_[e] = c;
    at_[ends_[e].first][c] = e;
    at_[ends_[e].second][c] = e;
  }
  void unset(int e) {
    int c = colour_[e];
    at_[ends_[e].first][c] = -1;
    at_[ends_[e].second][c] = -1;
    colour_[e] = -1;
  }
  void add_colour() {
    ++k_;
    for (auto& row : at_) row.push_back(-1);
  }

  // Swaps colours a and b along the alternating path starting at v.
  void swap_chain(int v, int a, int b) {
    std::vector<int> path;
    int cur = v, c = a;
    while (at_[cur][c] >= 0) {
      int e = at_[cur][c];
      path.push_back(e);
      cur = other(e, cur);
      c = c == a ? b : a;
    }
    for (int e : path) unset(e);
    int want = b;
    for (int e : path) {
      set(e, want);
      want = want == a ? b : a;
    }
  }

  int chain_end(int v, int a, int b) const {
    int cur = v, c = a;
    int steps = 0;
    while (at_[cur][c] >= 0 && steps <= static_cast<int>(ends_.size())) {
      cur = other(at_[cur][c], cur);
      c = c == a ? b : a;
      ++steps;
    }
    return cur;
  }

  // One attempt: multi-fan at an endpoint x of e; shift along the fan when a
  // colour is missing at x and some fan vertex, otherwise one Kempe swap.
  bool try_fan(int e0, Rng& rng) {
    int x = uniform01(rng) < 0.5 ? ends_[e0].first : ends_[e0].second;
    int y0 = other(e0, x);
    for (int c = 0; c < k_; ++c)
      if (missing(x, c) && missing(y0, c)) {
        set(e0, c);
        return true;
      }
    struct Entry {
      int edge, vertex, pred;
    };
    std::vector<Entry> fan{{e0, y0, -1}};
    std::vector<char> in_fan(ends_.size(), 0);
    in_fan[e0] = 1;
    for (std::size_t idx = 0; idx < fan.size(); ++idx) {
      int y = fan[idx].vertex;
      for (int c = 0; c < k_; ++c) {
        if (!missing(y, c)) continue;
        int e = at_[x][c];
        if (e < 0 || in_fan[e]) continue;
        in_fan[e] = 1;
        fan.push_back({e, other(e, x), static_cast<int>(idx)});
      }
    }
    for (std::size_t j = 0; j < fan.size(); ++j)
      for (int a = 0; a < k_; ++a)
        if (missing(x, a) && missing(fan[j].vertex, a)) {
          shift(fan, static_cast<int>(j), a);
          return true;
        }
    // Two fan vertices share a missing colour b; swap an a/b chain that
    // avoids x so that a becomes missing at one of them.
    std::vector<int> xa;
    for (int a = 0; a < k_; ++a)
      if (missing(x, a)) xa.push_back(a);
    if (xa.empty()) return false;
    int a = xa[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(xa.size()) - 1))];
    for (std::size_t i = 0; i < fan.size(); ++i)
      for (std::size_t j = i + 1; j < fan.size(); ++j) {
        int yi = fan[i].vertex, yj = fan[j].vertex;
        if (yi == yj) continue;
        for (int b = 0; b < k_; ++b) {
          if (!missing(yi, b) || !missing(yj, b)) continue;
          for (int v : {yj, yi}) {
            if (chain_end(v, a, b) == x) continue;
            swap_chain(v, a, b);
            return false;
          }
        }
      }
    // No shared colour: random Kempe swap at y0 to perturb the state.
    for (int b = 0; b < k_; ++b)
      if (missing(y0, b) && chain_end(y0, a, b) != x) {
        swap_chain(y0, a, b);
        break;
      }
    return false;
  }

  template <class Fan>
  void shift(const Fan& fan, int j, int a) {
    std::vector<int> path;
    for (int cur = j; cur >= 0; cur = fan[cur].pred) path.push_back(cur);
    std::vector<int> old(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) old[k] = colour_[fan[path[k]].edge];
    for (std::size_t k = 0; k < path.size(); ++k)
      if (old[k] >= 0) unset(fan[path[k]].edge);
    set(fan[path[0]].edge, a);
    for (std::size_t k = 1; k < path.size(); ++k) set(fan[path[k]].edge, old[k - 1]);
  }

  int k_;
  std::vector<std::pair<int, int>> ends_;
  std::vector<int> colour_;
  std::vector<std::vector<int>> at_;  // at_[v][c] = edge of colour c at v, or -1
};

}  // namespace detail

// Proper edge colouring of R* with at most Delta + mu colours; returns the
// non-empty colour classes as lists of edge indices.
inline std::vector<std::vector<int>> edge_color_matchings(const ReducedMultigraph& rm, std::uint64_t seed = 0) {
  int palette = std::max(1, rm.max_degree() + rm.max_multiplicity());
  detail::MultigraphColouring col(rm.part_count(), rm.edges, palette);
  Rng rng = make_rng(seed);
  for (int e = 0; e < static_cast<int>(rm.edges.size()); ++e) col.colour_edge(e, rng);
  std::vector<std::vector<int>> classes(static_cast<std::size_t>(col.palette()));
  for (int e = 0; e < static_cast<int>(rm.edges.size()); ++e) classes[col.colour(e)].push_back(e);
  std::vector<std::vector<int>> out;
  for (auto& c : classes)
    if (!c.empty()) out.push_back(std::move(c));
  return out;
}

// ---- matching structure ----

inline double kappa_value(double alpha, int t, int r) { return (alpha - 1.0 / std::cbrt(static_cast<double>(t))) * t * r; }

inline int kappa_count(double alpha, int t, int r) {
  double v = kappa_value(alpha, t, r);
  return v <= 0 ? 0 : static_cast<int>(std::ceil(v - 1e-9));
}

inline double matching_threshold(int t, int r) { return (1.0 - 1.0 / std::cbrt(static_cast<double>(t))) * r / 2.0; }

struct SubPairRecord {
  std::string name;  // "VV", "VU", "UV", "UU"
  double density = 0;
  RegularityStatus status = RegularityStatus::regular;
};

// One matched pair of parts after carving: side 0 comes from part_a.
struct SlotPair {
  int part_a = -1, part_b = -1, label = 0;
  std::array<VertexSet, 2> V;
  std::array<VertexSet, 2> U;
  double density = 0;
  std::array<SubPairRecord, 4> checks;
};

struct CarvedMatching {
  std::vector<int> reduced_edges;
  std::vector<SlotPair> slots;
  Graph carrier;  // payload edges inside the slots
  int n_bullet = 0;
  double density = 0;  // smallest pair density, used as d downstream

  VertexSet hub() const {
    VertexSet out;
    for (const auto& s : slots)
      for (const auto& u : s.U) out.insert(out.end(), u.begin(), u.end());
    std::sort(out.begin(), out.end());
    return out;
  }
  VertexSet bulk() const {
    VertexSet out;
    for (const auto& s : slots)
      for (const auto& v : s.V) out.insert(out.end(), v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct MatchingStructure {
  int kappa = 0;            // number of carved matchings
  int kappa_requested = 0;  // formula value (rounded up)
  std::vector<CarvedMatching> matchings;
  std::vector<std::string> notes;

  nlohmann::json summary() const {
    nlohmann::json out;
    out["kappa"] = kappa;
    out["matchings"] = nlohmann::json::array();
    for (const auto& m : matchings) {
      nlohmann::json jm;
      jm["pairs"] = nlohmann::json::array();
      jm["slot_sizes"] = nlohmann::json::array();
      jm["densities"] = nlohmann::json::array();
      for (const auto& s : m.slots) {
        jm["pairs"].push_back({s.part_a, s.part_b});
        jm["slot_sizes"].push_back({{"V", {s.V[0].size(), s.V[1].size()}}, {"U", {s.U[0].size(), s.U[1].size()}}});
        nlohmann::json d;
        for (const auto& c : s.checks) d[c.name] = {{"density", c.density}, {"status", to_string(c.status)}};
        jm["densities"].push_back(d);
      }
      jm["n_bullet"] = m.n_bullet;
      out["matchings"].push_back(jm);
    }
    return out;
  }
};

struct CarveOptions {
  // Fraction of each trimmed part sent to the hub side U. The formula value
  // is eps^{1/20}; negative means "use the formula".
  double hub_share = -1;
  int regularity_trials = 200;
};

namespace detail {

inline std::array<SubPairRecord, 4> record_subpairs(const Graph& carrier, const SlotPair& s, double eps,
                                                    int trials, std::uint64_t seed) {
  std::array<SubPairRecord, 4> out;
  const std::array<std::pair<const VertexSet*, const VertexSet*>, 4> sides{
      {{&s.V[0], &s.V[1]}, {&s.V[0], &s.U[1]}, {&s.U[0], &s.V[1]}, {&s.U[0], &s.U[1]}}};
  const char* names[4] = {"VV", "VU", "UV", "UU"};
  for (int k = 0; k < 4; ++k) {
    out[k].name = names[k];
    if (sides[k].first->empty() || sides[k].second->empty()) continue;
    BipartitePairView pv(carrier, *sides[k].first, *sides[k].second);
    auto v = regularity_test(pv, eps, RegularityMode::sampled(trials, mix_seed(seed, static_cast<std::uint64_t>(k))));
    out[k].density = v.density;
    out[k].status = v.status;
  }
  return out;
}

inline CarvedMatching carve_matching(const Graph& g, const ReducedMultigraph& rm, const std::vector<int>& cls,
                                     double epsilon, const CarveOptions& opt, std::uint64_t seed) {
  int n = g.vertex_count();
  CarvedMatching cm;
  cm.reduced_edges = cls;
  cm.carrier = Graph(n);
  double share = opt.hub_share >= 0 ? opt.hub_share : std::pow(epsilon, 1.0 / 20.0);
  std::vector<std::array<VertexSet, 2>> trimmed;
  std::vector<Graph> payloads;
  std::vector<double> dens;
  int smallest = n;
  for (int e : cls) {
    const auto& re = rm.edges[e];
    Graph pg(n);
    for (auto [u, v] : rm.payload[e]) pg.add_edge(u, v);
    BipartitePairView pv(pg, rm.parts[re.i], rm.parts[re.j]);
    double d = density(pv).value();
    auto tr = super_regular_trim(pv, epsilon, d);
    smallest = std::min({smallest, static_cast<int>(tr.side_a.size()), static_cast<int>(tr.side_b.size())});
    trimmed.push_back({tr.side_a, tr.side_b});
    payloads.push_back(std::move(pg));
    dens.push_back(d);
  }
  cm.n_bullet = static_cast<int>(std::floor((1.0 - share) * smallest + 1e-9));
  cm.density = dens.empty() ? 0 : *std::min_element(dens.begin(), dens.end());
  for (std::size_t k = 0; k < cls.size(); ++k) {
    const auto& re = rm.edges[cls[k]];
    BipartitePairView pv(payloads[k], trimmed[k][0], trimmed[k][1]);
    int na = static_cast<int>(trimmed[k][0].size()), nb = static_cast<int>(trimmed[k][1].size());
    auto four = partition_super_regular(pv, epsilon, dens[k], cm.n_bullet, na - cm.n_bullet, cm.n_bullet,
                                        nb - cm.n_bullet, mix_seed(seed, 100 + k));
    SlotPair sp;
    sp.part_a = re.i;
    sp.part_b = re.j;
    sp.label = re.label;
    sp.V = {four.a1, four.b1};
    sp.U = {four.a2, four.b2};
    sp.density = dens[k];
    VertexSet wa = trimmed[k][0], wb = trimmed[k][1];
    Bits mb(n, wb);
    for (Vertex a : wa)
      for (Vertex b : payloads[k].neighbors(a))
        if (mb.test(b)) cm.carrier.add_edge(a, b);
    cm.slots.push_back(std::move(sp));
  }
  for (std::size_t k = 0; k < cm.slots.size(); ++k)
    cm.slots[k].checks = record_subpairs(cm.carrier, cm.slots[k], epsilon, opt.regularity_trials, mix_seed(seed, 200 + k));
  return cm;
}

}  // namespace detail

// Keeps colour classes of size >= (1 - t^{-1/3}) r / 2 in decreasing size
// order and carves the first kappa of them. Throws StructuralError carrying
// the achievable count when fewer than kappa classes qualify.
inline MatchingStructure select_and_carve(const Graph& g, const ReducedMultigraph& rm,
                                          const std::vector<std::vector<int>>& colourings, double alpha, int t,
                                          double epsilon, std::uint64_t seed, const CarveOptions& opt = {},
                                          int kappa_override = -1) {
  int r = rm.part_count();
  MatchingStructure ms;
  ms.kappa_requested = kappa_override >= 0 ? kappa_override : kappa_count(alpha, t, r);
  double thr = matching_threshold(t, r);
  std::vector<std::size_t> order(colourings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return colourings[a].size() > colourings[b].size(); });
  std::vector<std::size_t> large;
  for (std::size_t i : order)
    if (static_cast<double>(colourings[i].size()) >= thr - 1e-9 && !colourings[i].empty()) large.push_back(i);
  if (static_cast<int>(large.size()) < ms.kappa_requested)
    throw StructuralError("select_and_carve: only " + std::to_string(large.size()) + " colour classes of size >= " +
                              std::to_string(thr) + ", kappa = " + std::to_string(ms.kappa_requested),
                          static_cast<int>(large.size()));
  ms.notes.push_back("colour classes taken in decreasing size order");
  for (int k = 0; k < ms.kappa_requested; ++k)
    ms.matchings.push_back(detail::carve_matching(g, rm, colourings[large[k]], epsilon, opt, mix_seed(seed, k)));
  ms.kappa = static_cast<int>(ms.matchings.size());
  return ms;
}

// ---- planted instances ----

struct PlantedSpec {
  int pairs = 3;           // matched pairs s
  int n_bullet = 150;      // |V_{s,i}|
  int hub_block = 30;      // |U_{s,i}|
  double density = 0.5;    // block density
  double reserve_p = 0.3;  // G(U, p) reserve on the whole hub
  std::uint64_t seed = 0;
};

// Host split three ways: g holds the V-V blocks, hub every other edge (U-V
// and U-U blocks plus the reserve), reserve only the G(U, p) part.
struct PlantedInstance {
  Graph g, hub, reserve;
  MatchingStructure structure;
};

inline PlantedInstance planted_instance(const PlantedSpec& spec) {
  if (spec.pairs < 1 || spec.n_bullet < 1 || spec.hub_block < 1) throw ParameterError("planted_instance: bad sizes");
  int block = spec.n_bullet + spec.hub_block;
  int n = 2 * spec.pairs * block;
  PlantedInstance pi{Graph(n), Graph(n), Graph(n), {}};
  Rng rng = make_rng(spec.seed);
  CarvedMatching cm;
  cm.carrier = Graph(n);
  cm.n_bullet = spec.n_bullet;
  cm.density = spec.density;
  VertexSet all_u;
  for (int s = 0; s < spec.pairs; ++s) {
    SlotPair sp;
    sp.part_a = 2 * s;
    sp.part_b = 2 * s + 1;
    sp.density = spec.density;
    for (int i = 0; i < 2; ++i) {
      int base = (2 * s + i) * block;
      sp.V[i] = iota_set(spec.n_bullet, base);
      sp.U[i] = iota_set(spec.hub_block, base + spec.n_bullet);
      all_u.insert(all_u.end(), sp.U[i].begin(), sp.U[i].end());
    }
    VertexSet w0 = sp.V[0], w1 = sp.V[1];
    w0.insert(w0.end(), sp.U[0].begin(), sp.U[0].end());
    w1.insert(w1.end(), sp.U[1].begin(), sp.U[1].end());
    Bits v0(n, sp.V[0]), v1(n, sp.V[1]);
    for (Vertex a : w0)
      for (Vertex b : w1)
        if (bernoulli(rng, spec.density)) {
          cm.carrier.add_edge(a, b);
          (v0.test(a) && v1.test(b) ? pi.g : pi.hub).add_edge(a, b);
        }
    cm.slots.push_back(std::move(sp));
  }
  add_random_edges(pi.reserve, all_u, spec.reserve_p, rng);
  for (auto [u, v] : pi.reserve.edges())
    if (!pi.hub.has_edge(u, v)) pi.hub.add_edge(u, v);
  // Reserve edges already inside a U-U block stay block edges.
  for (auto [u, v] : cm.carrier.edges())
    if (pi.reserve.has_edge(u, v)) pi.reserve.remove_edge(u, v);
  for (std::size_t k = 0; k < cm.slots.size(); ++k)
    cm.slots[k].checks = detail::record_subpairs(cm.carrier, cm.slots[k], 0.1, 200, mix_seed(spec.seed, 500 + k));
  pi.structure.kappa = 1;
  pi.structure.kappa_requested = 1;
  pi.structure.matchings.push_back(std::move(cm));
  pi.structure.notes.push_back("planted structure: parts and slots taken from the generator");
  return pi;
}

}  // namespace treepack
