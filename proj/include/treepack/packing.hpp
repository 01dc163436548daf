#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "treepack/blowup.hpp"
#include "treepack/config.hpp"
#include "treepack/graph.hpp"
#include "treepack/regularity.hpp"
#include "treepack/structure.hpp"
#include "treepack/tree.hpp"

namespace treepack {

// ---- state ----

struct FailureRecord {
  std::string stage;  // precondition, prep, slots, connector, batching, placement, blowup
  int collection = -1;
  std::vector<int> trees;  // original tree ids affected
  int piece = -1;
  int embed_case = 0;
  int slot = -1;
  int batch = -1;
  std::string detail;
  std::vector<long long> sizes;  // candidate-set sizes at the failing step

  nlohmann::json to_json() const {
    return {{"stage", stage}, {"collection", collection}, {"trees", trees}, {"piece", piece},
            {"case", embed_case}, {"slot", slot},           {"batch", batch}, {"detail", detail},
            {"sizes", sizes}};
  }
};

struct TreeRecord {
  int id = 0;
  RootedTree tree;
  std::vector<int> map;  // tree vertex -> host vertex, -1 when unmapped
  bool packed = false;
  int collection = -1;
};

struct PackingState {
  int host_vertices = 0;
  std::vector<TreeRecord> trees;
  Graph used;                    // host edges consumed by tree images (and join/padding edges)
  std::vector<int> hub_usage;    // connector images per host vertex, summed over collections
  std::vector<std::vector<Edge>> hub_edges_used;  // per collection: reserve edges consumed
  std::vector<VertexSet> hub_sets;                // U^k per collection
  std::vector<FailureRecord> failures;
  std::vector<std::string> log;
  nlohmann::json stats = nlohmann::json::array();  // per collection

  PackingState() = default;
  PackingState(int n, const std::vector<RootedTree>& ts) : host_vertices(n), used(n), hub_usage(static_cast<std::size_t>(n), 0) {
    for (std::size_t i = 0; i < ts.size(); ++i)
      trees.push_back({static_cast<int>(i), ts[i], std::vector<int>(static_cast<std::size_t>(ts[i].vertex_count()), -1),
                       false, -1});
  }

  int packed_count() const {
    int c = 0;
    for (const auto& t : trees) c += t.packed;
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json out;
    out["host_vertices"] = host_vertices;
    out["trees"] = nlohmann::json::array();
    for (const auto& t : trees) {
      nlohmann::json jt;
      jt["id"] = t.id;
      jt["root"] = t.tree.root();
      jt["parents"] = t.tree.parents();
      jt["packed"] = t.packed;
      jt["collection"] = t.collection;
      nlohmann::json m = nlohmann::json::array();
      for (std::size_t v = 0; v < t.map.size(); ++v)
        if (t.map[v] >= 0) m.push_back({static_cast<int>(v), t.map[v]});
      jt["map"] = m;
      out["trees"].push_back(jt);
    }
    out["used_edges"] = used.edge_count();
    out["hub_sets"] = hub_sets;
    std::map<int, int> hist;
    for (int u : hub_usage)
      if (u > 0) ++hist[u];
    nlohmann::json h = nlohmann::json::object();
    for (auto [k, c] : hist) h[std::to_string(k)] = c;
    out["hub_usage_histogram"] = h;
    return out;
  }

  std::string failures_jsonl() const {
    std::string s;
    for (const auto& f : failures) s += f.to_json().dump() + "\n";
    return s;
  }
};

// Rebuilds the tree list and maps of a state exported with to_json; used by
// the standalone auditor.
inline PackingState state_from_json(const nlohmann::json& js) {
  PackingState st;
  try {
    st.host_vertices = js.at("host_vertices").get<int>();
    st.used = Graph(st.host_vertices);
    st.hub_usage.assign(static_cast<std::size_t>(st.host_vertices), 0);
    for (const auto& jt : js.at("trees")) {
      TreeRecord tr;
      tr.id = jt.at("id").get<int>();
      tr.tree = RootedTree(jt.at("parents").get<std::vector<int>>(), jt.at("root").get<int>());
      tr.map.assign(static_cast<std::size_t>(tr.tree.vertex_count()), -1);
      for (const auto& p : jt.at("map")) {
        int v = p.at(0).get<int>(), h = p.at(1).get<int>();
        if (v < 0 || v >= tr.tree.vertex_count()) throw IoError("packing: tree vertex out of range");
        tr.map[v] = h;
      }
      tr.packed = jt.value("packed", false);
      tr.collection = jt.value("collection", -1);
      st.trees.push_back(std::move(tr));
    }
    if (js.contains("hub_sets")) st.hub_sets = js.at("hub_sets").get<std::vector<VertexSet>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("packing: malformed JSON: ") + e.what());
  }
  return st;
}

// ---- piece order ----

struct PieceRef {
  int tree = 0;
  int piece = 0;
  bool operator==(const PieceRef&) const = default;
};

// Trees stay contiguous; inside a tree pieces are sorted by the depth of
// their root, so an ancestor piece always comes first.
inline std::vector<PieceRef> order_pieces(const std::vector<RootedTree>& trees,
                                          const std::vector<SubtreeDecomposition>& decs) {
  if (trees.size() != decs.size()) throw ParameterError("order_pieces: one decomposition per tree");
  std::vector<PieceRef> out;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    std::vector<int> ids(decs[t].pieces.size());
    for (std::size_t p = 0; p < ids.size(); ++p) ids[p] = static_cast<int>(p);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      int ra = decs[t].pieces[a].root, rb = decs[t].pieces[b].root;
      return std::pair(trees[t].depth(ra), ra) < std::pair(trees[t].depth(rb), rb);
    });
    for (int p : ids) out.push_back({static_cast<int>(t), p});
  }
  return out;
}

// ---- work trees ----

// A tree as the engine handles it: possibly several input trees joined, or
// one padded with a dummy path.
struct TreeJob {
  RootedTree tree;
  std::vector<std::pair<int, int>> origin;  // vertex -> (input tree id, vertex); (-1, -1) for padding
  SubtreeDecomposition dec;
  TreeSplit split;
  std::vector<int> image;
  std::vector<Edge> edges_used;
  std::vector<int> usage_marks;  // hub vertices whose usage this job raised
  bool alive = true;

  std::vector<int> members() const {
    std::vector<int> ids;
    for (auto [t, v] : origin)
      if (t >= 0 && (ids.empty() || ids.back() != t)) ids.push_back(t);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }
};

namespace detail {

inline int first_open_vertex(const RootedTree& t, int cap) {
  for (int v : t.bfs_order())
    if (t.degree(v) < cap) return v;
  throw InternalError("tree without a vertex of degree below the cap");
}

// Joins b below a by one edge: at the roots when both have spare degree,
// otherwise at the first non-full vertex of each.
inline TreeJob join_jobs(const TreeJob& a, const TreeJob& b, int cap) {
  int na = a.tree.vertex_count(), nb = b.tree.vertex_count();
  int ja = a.tree.root(), jb = b.tree.root();
  if (a.tree.degree(ja) >= cap || b.tree.degree(jb) >= cap) {
    ja = first_open_vertex(a.tree, cap);
    jb = first_open_vertex(b.tree, cap);
  }
  Graph g(na + nb);
  for (auto [u, v] : a.tree.edges()) g.add_edge(u, v);
  for (auto [u, v] : b.tree.edges()) g.add_edge(na + u, na + v);
  g.add_edge(ja, na + jb);
  TreeJob out;
  out.tree = tree_from_graph(g, a.tree.root());
  out.origin = a.origin;
  out.origin.insert(out.origin.end(), b.origin.begin(), b.origin.end());
  return out;
}

inline TreeJob pad_job(const TreeJob& a, int extra, int cap) {
  int na = a.tree.vertex_count();
  // Deepest open vertex: the last one in BFS order with spare degree.
  int at = -1;
  for (int v : a.tree.bfs_order())
    if (a.tree.degree(v) < cap) at = v;
  std::vector<int> parent = a.tree.parents();
  int prev = at;
  for (int k = 0; k < extra; ++k) {
    parent.push_back(prev);
    prev = na + k;
  }
  TreeJob out;
  out.tree = RootedTree(parent, a.tree.root());
  out.origin = a.origin;
  out.origin.resize(static_cast<std::size_t>(na + extra), {-1, -1});
  return out;
}

struct SlotIndex {
  std::vector<int> slot, side;
  std::vector<char> kind;  // 0 none, 1 V, 2 U
  std::vector<std::array<Bits, 2>> V, U;

  SlotIndex(int n, const CarvedMatching& cm)
      : slot(static_cast<std::size_t>(n), -1), side(static_cast<std::size_t>(n), -1), kind(static_cast<std::size_t>(n), 0) {
    for (std::size_t s = 0; s < cm.slots.size(); ++s) {
      const auto& sp = cm.slots[s];
      V.push_back({Bits(n, sp.V[0]), Bits(n, sp.V[1])});
      U.push_back({Bits(n, sp.U[0]), Bits(n, sp.U[1])});
      for (int i = 0; i < 2; ++i) {
        for (int v : sp.V[i]) {
          slot[v] = static_cast<int>(s);
          side[v] = i;
          kind[v] = 1;
        }
        for (int u : sp.U[i]) {
          slot[u] = static_cast<int>(s);
          side[u] = i;
          kind[u] = 2;
        }
      }
    }
  }
};

}  // namespace detail

// One application of the collection-packing pipeline against the host G*_k.
class CollectionPacker {
 public:
  CollectionPacker(const Graph& host, const CarvedMatching& cm, const PipelineConfig& cfg, PackingState& state,
                   int collection = 0, const Graph* reserve = nullptr)
      : host_(host),
        cm_(cm),
        cfg_(cfg),
        state_(state),
        k_(collection),
        reserve_(reserve),
        idx_(host.vertex_count(), cm),
        usage_(static_cast<std::size_t>(host.vertex_count()), 0),
        full_(host.vertex_count()) {
    if (state_.host_vertices != host.vertex_count()) throw ParameterError("pack: state and host sizes differ");
    d_ = cm.density > 0 ? cm.density : cfg.d;
    gap_ = std::max(0.0, d_ - std::sqrt(cfg.epsilon));
  }

  const std::vector<TreeJob>& jobs() const { return jobs_; }
  std::vector<TreeJob>& jobs() { return jobs_; }
  const std::vector<int>& usage() const { return usage_; }
  const nlohmann::json& stats() const { return stats_; }

  // Adds an already prepared job (decomposition, split and slots filled in).
  void add_job(TreeJob job) {
    job.image.assign(static_cast<std::size_t>(job.tree.vertex_count()), -1);
    jobs_.push_back(std::move(job));
  }

  // Tree prep: merge small trees, pad the last small one, partition, split and
  // assign slots.
  void prepare(const std::vector<int>& tree_ids) {
    int m = static_cast<int>(cm_.slots.size());
    int n = cm_.n_bullet;
    double small = (2.0 / 3.0) * m * n;
    double limit = 2.0 * (1.0 - cfg_.nu) * m * n;
    std::vector<TreeJob> work;
    for (int id : tree_ids) {
      TreeJob j;
      const auto& t = state_.trees[id].tree;
      j.tree = t;
      for (int v = 0; v < t.vertex_count(); ++v) j.origin.emplace_back(id, v);
      work.push_back(std::move(j));
    }
    std::vector<TreeJob> ready;
    using Item = std::pair<int, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<TreeJob> pool;
    for (auto& j : work) {
      if (j.tree.vertex_count() < small) {
        heap.emplace(j.tree.vertex_count(), pool.size());
        pool.push_back(std::move(j));
      } else {
        ready.push_back(std::move(j));
      }
    }
    while (heap.size() >= 2) {
      auto [sa, ia] = heap.top();
      heap.pop();
      auto [sb, ib] = heap.top();
      heap.pop();
      if (sa + sb > limit) {
        ready.push_back(std::move(pool[ia]));
        heap.emplace(sb, ib);
        continue;
      }
      TreeJob joined = detail::join_jobs(pool[ia], pool[ib], cfg_.Delta);
      std::ostringstream os;
      os << "collection " << k_ << ": joined trees of sizes " << sa << " and " << sb;
      state_.log.push_back(os.str());
      int sz = joined.tree.vertex_count();
      if (sz < small) {
        heap.emplace(sz, pool.size());
        pool.push_back(std::move(joined));
      } else {
        ready.push_back(std::move(joined));
      }
    }
    if (!heap.empty()) {
      auto [sz, i] = heap.top();
      TreeJob last = std::move(pool[i]);
      int deficit = static_cast<int>(std::ceil(small - 1e-9)) - sz;
      if (cfg_.pad_small_trees && deficit > 0) {
        last = detail::pad_job(last, deficit, cfg_.Delta);
        std::ostringstream os;
        os << "collection " << k_ << ": padded a tree of size " << sz << " with " << deficit << " dummy vertices";
        state_.log.push_back(os.str());
      }
      ready.push_back(std::move(last));
    }
    int piece = cfg_.piece_size_for(n);
    for (std::size_t j = 0; j < ready.size(); ++j) {
      TreeJob& job = ready[j];
      job.dec = partition_subtrees(job.tree, piece);
      job.split = split_connector(job.tree, job.dec);
      try {
        job.split = assign_slots(std::move(job.split), m, cfg_.epsilon, static_cast<double>(n),
                                 mix_seed(cfg_.seed, 1000 + 97ULL * k_ + j), cfg_.slot_budget);
      } catch (const ProbabilisticFailure& e) {
        fail_prep(job, "slots", e.what());
        job.alive = false;
      }
      if (job.alive)
        for (int s = 0; s < m; ++s)
          for (int i = 0; i < 2; ++i)
            if (static_cast<int>(job.split.slot_classes[s][i].size()) > n) {
              fail_prep(job, "slots", "class X_" + std::to_string(i) + "^" + std::to_string(s) + " larger than n");
              job.alive = false;
            }
      add_job(std::move(job));
    }
  }

  // Connector embedding into the hub, piece by piece in order. A tree that
  // gets stuck is rolled back and reported.
  void embed_connectors() {
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      TreeJob& job = jobs_[j];
      if (!job.alive) continue;
      tree_images_ = Bits(host_.vertex_count());
      std::vector<SubtreeDecomposition> one{job.dec};
      auto order = order_pieces({job.tree}, one);
      for (const auto& pr : order) {
        if (!embed_piece(job, static_cast<int>(j), pr.piece)) {
          rollback(job);
          break;
        }
      }
      if (job.alive) check_phi(job);
    }
  }

  // Bulk forests, slot pair by slot pair.
  void pack_bulk() {
    for (int s = 0; s < static_cast<int>(cm_.slots.size()); ++s) pack_slot(s);
  }

  // Copies images back to the input trees and checks the hub degree bound.
  void assemble() {
    std::vector<int> hub_deg(static_cast<std::size_t>(host_.vertex_count()), 0);
    long long used = 0;
    std::vector<Edge> reserve_used;
    for (auto& job : jobs_) {
      if (!job.alive) continue;
      for (int v = 0; v < job.tree.vertex_count(); ++v)
        if (job.image[v] < 0) throw InternalError("assemble: unmapped vertex in a live tree");
      for (auto [a, b] : job.tree.edges()) {
        int ha = job.image[a], hb = job.image[b];
        if (idx_.kind[ha] == 2) ++hub_deg[ha];
        if (idx_.kind[hb] == 2) ++hub_deg[hb];
      }
      for (auto e : job.edges_used)
        if (reserve_ && reserve_->has_edge(e.first, e.second)) reserve_used.push_back(e);
      used += static_cast<long long>(job.edges_used.size());
      for (int v = 0; v < job.tree.vertex_count(); ++v) {
        auto [id, tv] = job.origin[v];
        if (id < 0) continue;
        state_.trees[id].map[tv] = job.image[v];
      }
      for (int id : job.members()) {
        state_.trees[id].packed = true;
        state_.trees[id].collection = k_;
      }
    }
    int worst = 0;
    for (int d : hub_deg) worst = std::max(worst, d);
    if (worst > cfg_.Delta * cfg_.M) throw InternalError("assemble: hub image degree above Delta M");
    for (std::size_t v = 0; v < usage_.size(); ++v) state_.hub_usage[v] += usage_[v];
    if (static_cast<int>(state_.hub_edges_used.size()) <= k_) state_.hub_edges_used.resize(static_cast<std::size_t>(k_ + 1));
    state_.hub_edges_used[k_] = reserve_used;
    stats_["hub_degree_max"] = worst;
    stats_["edges_used"] = used;
    stats_["jobs"] = jobs_.size();
    int alive = 0;
    for (const auto& j : jobs_) alive += j.alive;
    stats_["jobs_packed"] = alive;
  }

 private:
  Bits avail(int h) const {
    Bits r = host_.row(h);
    r.subtract(state_.used.row(h));
    return r;
  }

  void fail_prep(const TreeJob& job, const std::string& stage, const std::string& detail) {
    FailureRecord f;
    f.stage = stage;
    f.collection = k_;
    f.trees = job.members();
    f.detail = detail;
    state_.failures.push_back(std::move(f));
  }

  int choose(const VertexSet& cands, Rng& rng) const {
    if (cfg_.min_usage_choice) {
      int best = cands.front();
      for (int c : cands)
        if (usage_[c] < usage_[best]) best = c;
      return best;
    }
    return cands[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(cands.size()) - 1))];
  }

  // Candidate order for backtracking: random, or least used first.
  VertexSet candidate_order(VertexSet cands, Rng& rng) const {
    if (cfg_.min_usage_choice) {
      std::stable_sort(cands.begin(), cands.end(), [&](int a, int b) { return usage_[a] < usage_[b]; });
    } else {
      shuffle(cands, rng);
    }
    return cands;
  }

  void use_edge(TreeJob& job, int a, int b) {
    if (!host_.has_edge(a, b) || state_.used.has_edge(a, b))
      throw InternalError("pack: edge " + std::to_string(a) + "-" + std::to_string(b) + " missing or already used");
    state_.used.add_edge(a, b);
    job.edges_used.push_back(make_edge(a, b));
  }

  void mark_image(TreeJob& job, int v, int h, bool connector) {
    job.image[v] = h;
    tree_images_.set(h);
    if (connector) {
      ++usage_[h];
      job.usage_marks.push_back(h);
      if (usage_[h] >= cfg_.M) full_.set(h);
    }
  }

  void rollback(TreeJob& job) {
    for (auto [a, b] : job.edges_used) state_.used.remove_edge(a, b);
    for (int h : job.usage_marks) {
      --usage_[h];
      if (usage_[h] < cfg_.M) full_.reset(h);
    }
    job.edges_used.clear();
    job.usage_marks.clear();
    std::fill(job.image.begin(), job.image.end(), -1);
    job.alive = false;
  }

  // Embedded neighbours of v in the current job.
  VertexSet embedded_neighbours(const TreeJob& job, int v) const {
    VertexSet out;
    for (int u : job.tree.neighbors(v))
      if (job.image[u] >= 0) out.push_back(u);
    return out;
  }

  bool has_bulk_child(const TreeJob& job, int v) const {
    for (int c : job.tree.children(v))
      if (!job.split.in_connector[c]) return true;
    return false;
  }

  bool embed_piece(TreeJob& job, int j, int p) {
    const auto& T = job.tree;
    const auto& sp = job.split;
    Rng rng = make_rng(cfg_.seed, mix_seed(2000 + 131ULL * k_ + j, static_cast<std::uint64_t>(p)));
    int n = cm_.n_bullet;
    int x = sp.piece_roots[p];
    auto [s, ip] = sp.slot_of_piece[p];
    int bclass = 1 - ip;
    int y = T.parent(x);
    int ecase = 0, ss = s, ii = bclass;
    Bits cand(host_.vertex_count());
    if (y < 0) {
      ecase = 2;
      cand = idx_.U[ss][1 - ii];
    } else if (sp.in_connector[y]) {
      ecase = 1;
      int hy = job.image[y];
      if (hy < 0 || idx_.kind[hy] != 2) throw InternalError("embed_piece: parent connector vertex not in the hub");
      ss = idx_.slot[hy];
      ii = idx_.side[hy];
      cand = idx_.U[ss][1 - ii];
      cand &= avail(hy);
    } else {
      ecase = 3;
      ss = sp.slot_of_vertex[y].first;
      ii = sp.slot_of_vertex[y].second;
      cand = idx_.U[ss][1 - ii];
    }
    cand.subtract(full_);
    cand.subtract(tree_images_);
    std::vector<long long> sizes{cand.count()};
    if (ecase == 3) {
      // Keep the common neighbourhood of y's embedded neighbours large.
      VertexSet ys = embedded_neighbours(job, y);
      Bits common = idx_.V[ss][ii];
      for (int u : ys) common &= avail(job.image[u]);
      double thr = std::pow(gap_, static_cast<double>(ys.size() + 1)) * n;
      Bits keep(host_.vertex_count());
      for (int u : cand.members())
        if (avail(u).count_and(common) >= thr - 1e-9) keep.set(u);
      cand = keep;
      sizes.push_back(cand.count());
    }
    VertexSet children;
    for (int c : T.children(x))
      if (sp.piece_of[c] == p) children.push_back(c);
    int reach = cfg_.child_reach_for(n);
    VertexSet xs = candidate_order(cand.members(), rng);
    if (static_cast<int>(xs.size()) > cfg_.connector_tries) xs.resize(static_cast<std::size_t>(cfg_.connector_tries));
    long long best_children = -1;
    for (int hx : xs) {
      // Tentative images of the whole piece connector.
      std::vector<std::pair<int, int>> placed{{x, hx}};
      Bits taken = tree_images_;
      taken.set(hx);
      Bits W = idx_.U[ss][ii];
      W &= avail(hx);
      W.subtract(full_);
      Bits Wp = idx_.U[s][ip];
      Wp.subtract(full_);
      bool ok = true;
      long long w_size = W.count();
      for (int c : children) {
        VertexSet grand;
        for (int g : T.children(c))
          if (sp.piece_of[g] == p) grand.push_back(g);
        Bits wc = W;
        wc.subtract(taken);
        VertexSet opts;
        for (int h : wc.members()) {
          Bits nb = avail(h);
          nb &= Wp;
          nb.subtract(taken);
          if (nb.count() >= reach) opts.push_back(h);
        }
        w_size = std::min<long long>(w_size, static_cast<long long>(opts.size()));
        opts = candidate_order(opts, rng);
        if (static_cast<int>(opts.size()) > cfg_.connector_tries) opts.resize(static_cast<std::size_t>(cfg_.connector_tries));
        bool placed_child = false;
        for (int hc : opts) {
          Bits nb = avail(hc);
          nb &= Wp;
          nb.subtract(taken);
          std::vector<std::pair<int, int>> gp;
          Bits local = taken;
          local.set(hc);
          bool all = true;
          for (int g : grand) {
            Bits pool = nb;
            pool.subtract(local);
            VertexSet gc;
            bool need_bulk = has_bulk_child(job, g);
            for (int h : pool.members())
              if (!need_bulk || avail(h).count_and(idx_.V[s][bclass]) >= gap_ * n - 1e-9) gc.push_back(h);
            if (gc.empty()) {
              all = false;
              break;
            }
            int h = choose(gc, rng);
            gp.emplace_back(g, h);
            local.set(h);
          }
          if (!all) continue;
          placed.emplace_back(c, hc);
          for (auto pr : gp) placed.push_back(pr);
          taken = local;
          placed_child = true;
          break;
        }
        if (!placed_child) {
          ok = false;
          break;
        }
      }
      best_children = std::max(best_children, w_size);
      if (!ok) continue;
      // Commit: images, usage and the hub edges inside the piece connector.
      for (auto [v, h] : placed) mark_image(job, v, h, true);
      if (ecase == 1) use_edge(job, job.image[x], job.image[y]);
      for (auto [v, h] : placed)
        if (v != x) use_edge(job, h, job.image[T.parent(v)]);
      return true;
    }
    sizes.push_back(best_children);
    FailureRecord f;
    f.stage = "connector";
    f.collection = k_;
    f.trees = job.members();
    f.piece = p;
    f.embed_case = ecase;
    f.slot = s;
    f.sizes = sizes;
    f.detail = xs.empty() ? "no candidate for the piece root" : "no candidate image extends to children and grandchildren";
    state_.failures.push_back(std::move(f));
    return false;
  }

  // Runtime checks of the connector invariants for one job.
  void check_phi(const TreeJob& job) {
    const auto& sp = job.split;
    int n = cm_.n_bullet;
    for (int h : job.usage_marks)
      if (usage_[h] > cfg_.M) throw InternalError("Phi3: hub vertex used more than M times");
    for (int y : sp.bulk) {
      auto [s, i] = sp.slot_of_vertex[y];
      VertexSet nbs = embedded_neighbours(job, y);
      if (nbs.empty()) continue;
      Bits common = idx_.V[s][i];
      for (int x : nbs) {
        int h = job.image[x];
        if (!idx_.U[s][1 - i].test(h)) throw InternalError("Phi1: connector neighbour of a bulk vertex off its U slot");
        common &= host_.row(h);
      }
      double thr = std::pow(gap_, static_cast<double>(nbs.size())) * n;
      if (common.count() < thr - 1e-9) throw InternalError("Phi2: common neighbourhood below threshold");
      ++phi_checks_;
    }
    stats_["phi_checks"] = phi_checks_;
  }

  void pack_slot(int s) {
    int n = cm_.n_bullet;
    const auto& slot = cm_.slots[s];
    struct Forest {
      int job;
      ForestSpec spec;
      std::vector<std::pair<int, VertexSet>> ys;  // bulk vertex -> connector neighbours
    };
    std::vector<Forest> forests;
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      const TreeJob& job = jobs_[j];
      if (!job.alive) continue;
      const auto& cls = job.split.slot_classes[s];
      if (cls[0].empty() && cls[1].empty()) continue;
      Forest f;
      f.job = static_cast<int>(j);
      f.spec.X = cls;
      Bits in0(job.tree.vertex_count(), cls[0]);
      for (int v : cls[0]) {
        for (int u : job.tree.neighbors(v))
          if (!job.split.in_connector[u]) f.spec.edges.emplace_back(v, u);
      }
      for (int i = 0; i < 2; ++i)
        for (int v : cls[i]) {
          VertexSet nb;
          for (int u : job.tree.neighbors(v))
            if (job.split.in_connector[u]) nb.push_back(u);
          if (!nb.empty()) {
            f.spec.W.push_back(v);
            f.ys.emplace_back(v, nb);
          }
        }
      if (static_cast<int>(f.spec.W.size()) > cfg_.M) {
        std::ostringstream os;
        os << "collection " << k_ << " slot " << s << ": |W| = " << f.spec.W.size() << " above M";
        state_.log.push_back(os.str());
      }
      forests.push_back(std::move(f));
    }
    if (forests.empty()) return;
    std::vector<long long> fe;
    for (const auto& f : forests) fe.push_back(static_cast<long long>(f.spec.edges.size()));
    BatchPlan plan;
    try {
      plan = batch_forests(fe, n, cfg_.q, cfg_.zeta);
    } catch (const ParameterError& e) {
      for (const auto& f : forests) fail_job(jobs_[f.job], "batching", s, -1, e.what());
      return;
    }
    for (const auto& w : plan.warnings) state_.log.push_back("collection " + std::to_string(k_) + ": " + w);
    std::vector<BlowupBatch> bbs;
    std::vector<BatchPacking> packs;
    std::vector<int> batch_of_plan;  // blow-up batch index -> plan batch
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      std::vector<ForestSpec> specs;
      for (int f : plan.batches[b]) specs.push_back(forests[f].spec);
      try {
        packs.push_back(pack_batch_regular(specs, n, cfg_.q, cfg_.zeta,
                                           mix_seed(cfg_.seed, 3000 + 7919ULL * k_ + 131ULL * s + b),
                                           cfg_.placement_budget));
      } catch (const Error& e) {
        for (int f : plan.batches[b]) fail_job(jobs_[forests[f].job], "placement", s, static_cast<int>(b), e.what());
        continue;
      }
      batch_of_plan.push_back(static_cast<int>(b));
    }
    // Targets and the conflict graph.
    ConflictGraph gamma;
    double min_ratio = 1e18;
    for (std::size_t bb = 0; bb < packs.size(); ++bb) {
      BlowupBatch B;
      B.H = packs[bb].H;
      B.required = packs[bb].required;
      const auto& members = plan.batches[batch_of_plan[bb]];
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Forest& f = forests[members[k]];
        const TreeJob& job = jobs_[f.job];
        for (const auto& [v, nb] : f.ys) {
          int cls = job.split.slot_of_vertex[v].second;
          Bits A = idx_.V[s][cls];
          VertexSet hubs;
          for (int x : nb) {
            A &= avail(job.image[x]);
            hubs.push_back(job.image[x]);
          }
          int a = packs[bb].place[k].at(v);
          B.targets[a] = A.members();
          double need = std::pow(gap_, static_cast<double>(nb.size())) * n;
          if (need > 0) min_ratio = std::min(min_ratio, A.count() / need);
          gamma.add_node(static_cast<int>(bb), a, hubs);
        }
      }
      bbs.push_back(std::move(B));
    }
    gamma.build();
    auto out = blowup_pack(host_, state_.used, {slot.V[0], slot.V[1]}, bbs, gamma, cfg_.blowup_budget,
                           mix_seed(cfg_.seed, 5000 + 7919ULL * k_ + s));
    auto violations = check_blowup_contract(host_, state_.used, {slot.V[0], slot.V[1]}, bbs, gamma, out);
    if (!violations.empty()) throw InternalError("blowup contract violated: " + violations.front());
    nlohmann::json st;
    st["slot"] = s;
    st["forests"] = forests.size();
    st["batches"] = packs.size();
    st["conflict_max_degree"] = gamma.max_degree();
    st["conflict_max_batch_degree"] = gamma.max_batch_degree();
    st["target_min_ratio"] = min_ratio > 1e17 ? 0.0 : min_ratio;
    int failed = 0;
    for (std::size_t bb = 0; bb < packs.size(); ++bb) {
      const auto& members = plan.batches[batch_of_plan[bb]];
      if (out.maps[bb].empty()) {
        ++failed;
        for (int f : members) fail_job(jobs_[forests[f].job], "blowup", s, static_cast<int>(bb), out.errors[bb]);
        continue;
      }
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Forest& f = forests[members[k]];
        TreeJob& job = jobs_[f.job];
        if (!job.alive) continue;
        for (int i = 0; i < 2; ++i)
          for (int v : f.spec.X[i]) job.image[v] = out.maps[bb][packs[bb].place[k].at(v)];
        for (auto [a, b] : f.spec.edges) use_edge(job, job.image[a], job.image[b]);
        for (const auto& [v, nb] : f.ys)
          for (int x : nb) use_edge(job, job.image[v], job.image[x]);
      }
    }
    st["failed_batches"] = failed;
    stats_["slots"].push_back(st);
  }

  void fail_job(TreeJob& job, const std::string& stage, int s, int batch, const std::string& detail) {
    if (!job.alive) return;
    FailureRecord f;
    f.stage = stage;
    f.collection = k_;
    f.trees = job.members();
    f.slot = s;
    f.batch = batch;
    f.detail = detail;
    state_.failures.push_back(std::move(f));
    rollback(job);
  }

  const Graph& host_;
  const CarvedMatching& cm_;
  PipelineConfig cfg_;
  PackingState& state_;
  int k_;
  const Graph* reserve_;
  detail::SlotIndex idx_;
  std::vector<int> usage_;
  Bits full_;         // usage reached M (U')
  Bits tree_images_;  // images of the current job (U'')
  std::vector<TreeJob> jobs_;
  double d_ = 0, gap_ = 0;
  long long phi_checks_ = 0;
  nlohmann::json stats_ = {{"slots", nlohmann::json::array()}};
};

// ---- one collection ----

inline void check_collection_preconditions(const CarvedMatching& cm, const std::vector<RootedTree>& trees,
                                           const PipelineConfig& cfg) {
  int m = static_cast<int>(cm.slots.size());
  double n = cm.n_bullet;
  double d = cm.density > 0 ? cm.density : cfg.d;
  long long e = 0;
  for (const auto& t : trees) {
    e += t.edge_count();
    if (t.vertex_count() > 2.0 * (1.0 - cfg.nu) * m * n + 1e-9)
      throw ParameterError("pack_collection: tree of " + std::to_string(t.vertex_count()) +
                           " vertices above 2(1-nu) r n");
    if (t.max_degree() > cfg.Delta) throw ParameterError("pack_collection: tree degree above Delta");
  }
  double cap = (1.0 - cfg.nu) * m * d * n * n;
  if (static_cast<double>(e) > cap + 1e-9)
    throw ParameterError("pack_collection: e(T) = " + std::to_string(e) + " above (1-nu) r d n^2 = " + std::to_string(cap));
}

// Packs the listed trees of the state into host (the carrier G*_k of one
// matching structure). Failed trees are rolled back and reported; the rest
// are written into the state.
inline void pack_collection(const Graph& host, const CarvedMatching& cm, const std::vector<int>& tree_ids,
                            PackingState& state, const PipelineConfig& cfg, int collection = 0,
                            const Graph* reserve = nullptr) {
  std::vector<RootedTree> ts;
  for (int id : tree_ids) ts.push_back(state.trees.at(id).tree);
  check_collection_preconditions(cm, ts, cfg);
  if (cm.slots.empty()) throw ParameterError("pack_collection: structure has no slots");
  if (static_cast<int>(state.hub_sets.size()) <= collection) state.hub_sets.resize(static_cast<std::size_t>(collection + 1));
  state.hub_sets[collection] = cm.hub();
  if (tree_ids.empty()) return;
  CollectionPacker packer(host, cm, cfg, state, collection, reserve);
  packer.prepare(tree_ids);
  packer.embed_connectors();
  packer.pack_bulk();
  packer.assemble();
  nlohmann::json st = packer.stats();
  st["collection"] = collection;
  state.stats.push_back(st);
}

// ---- outer loop ----

namespace detail {

// Largest-first into the least-loaded collection.
inline std::vector<std::vector<int>> split_collections(const std::vector<RootedTree>& trees, int kappa) {
  std::vector<int> order(trees.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return trees[a].edge_count() > trees[b].edge_count(); });
  std::vector<std::vector<int>> out(static_cast<std::size_t>(kappa));
  std::vector<long long> load(static_cast<std::size_t>(kappa), 0);
  for (int t : order) {
    std::size_t k = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    out[k].push_back(t);
    load[k] += trees[t].edge_count();
  }
  for (auto& c : out) std::sort(c.begin(), c.end());
  return out;
}

}  // namespace detail

// Iterates the collection packer over the carved matchings with hub-edge
// bookkeeping: G*_k is the k-th carrier plus the unused reserve edges inside
// U^k. Failures are recorded in the returned state, not thrown.
inline PackingState pack_theorem(const Graph& g, const Graph& hub_reserve, const MatchingStructure& ms,
                                 const std::vector<RootedTree>& trees, const PipelineConfig& cfg) {
  int N = g.vertex_count();
  if (hub_reserve.vertex_count() != N) throw ParameterError("pack_theorem: g and hub differ in vertex count");
  for (auto [u, v] : hub_reserve.edges())
    if (g.has_edge(u, v)) throw ParameterError("pack_theorem: g and hub share an edge");
  PackingState state(N, trees);
  int nb = ms.matchings.empty() ? 0 : ms.matchings.front().n_bullet;
  for (auto& line : cfg.validate(nb)) state.log.push_back("config: " + line);
  long long e = 0;
  for (const auto& t : trees) e += t.edge_count();
  double eg = static_cast<double>(g.edge_count());
  if (static_cast<double>(e) > (1.0 - cfg.nu) * eg + 1e-9)
    throw ParameterError("pack_theorem: e(T) = " + std::to_string(e) + " above (1-nu) e(g)");
  int kappa = ms.kappa;
  if (kappa < 1) throw StructuralError("pack_theorem: no matchings to pack into", 0);
  auto cols = detail::split_collections(trees, kappa);
  for (int k = 0; k < kappa; ++k) {
    long long ek = 0;
    for (int t : cols[k]) ek += trees[t].edge_count();
    if (static_cast<double>(ek) >= (1.0 / kappa) * (1.0 - 2.0 * cfg.nu / 3.0) * eg)
      throw ParameterError("pack_theorem: collection " + std::to_string(k) + " breaks e(T_k) < (1/kappa)(1-2nu/3)e(g)");
  }
  Graph h_prev(N);  // reserve edges used by earlier collections
  for (int k = 0; k < kappa; ++k) {
    const auto& cm = ms.matchings[k];
    Graph host = cm.carrier;
    VertexSet hub = cm.hub();
    Bits in_hub(N, hub);
    for (int u : hub)
      for (int v : hub_reserve.neighbors(u))
        if (v > u && in_hub.test(v) && !h_prev.has_edge(u, v)) host.add_edge(u, v);
    try {
      pack_collection(host, cm, cols[k], state, cfg, k, &hub_reserve);
    } catch (const ParameterError& err) {
      FailureRecord f;
      f.stage = "precondition";
      f.collection = k;
      f.trees = cols[k];
      f.detail = err.what();
      state.failures.push_back(std::move(f));
      continue;
    }
    if (static_cast<int>(state.hub_edges_used.size()) > k)
      for (auto [u, v] : state.hub_edges_used[k]) h_prev.add_edge(u, v);
    // Bookkeeping bound on the reserve edges used so far.
    long long bound = static_cast<long long>(cfg.Delta) * cfg.M * (k + 1);
    if (h_prev.max_degree() > bound) {
      std::ostringstream os;
      os << "G1: max degree of used reserve edges " << h_prev.max_degree() << " above Delta M k = " << bound;
      state.log.push_back(os.str());
    }
  }
  return state;
}

// Full pipeline from g: heuristic regular partition, reduced multigraph,
// colouring, carving (falling back to the achievable kappa), then the loop.
inline PackingState pack_theorem(const Graph& g, const Graph& hub_reserve, const std::vector<RootedTree>& trees,
                                 const PipelineConfig& cfg, MatchingStructure* structure_out = nullptr) {
  cfg.validate();
  auto rp = regular_partition_heuristic(g, cfg.r, cfg.epsilon, cfg.seed);
  auto rm = build_reduced(g, rp, cfg.t, mix_seed(cfg.seed, 1));
  auto classes = edge_color_matchings(rm, mix_seed(cfg.seed, 2));
  CarveOptions opt;
  opt.hub_share = cfg.hub_share;
  MatchingStructure ms;
  std::vector<std::string> notes;
  try {
    ms = select_and_carve(g, rm, classes, cfg.alpha, cfg.t, cfg.epsilon, mix_seed(cfg.seed, 3), opt);
  } catch (const StructuralError& e) {
    if (e.achievable < 1) throw;
    notes.push_back(std::string("structure: ") + e.what() + "; continuing with kappa' = " + std::to_string(e.achievable));
    ms = select_and_carve(g, rm, classes, cfg.alpha, cfg.t, cfg.epsilon, mix_seed(cfg.seed, 3), opt, e.achievable);
  }
  if (ms.kappa < 1) {
    notes.push_back("structure: kappa formula gave 0; using one matching");
    ms = select_and_carve(g, rm, classes, cfg.alpha, cfg.t, cfg.epsilon, mix_seed(cfg.seed, 3), opt, 1);
  }
  auto state = pack_theorem(g, hub_reserve, ms, trees, cfg);
  state.log.insert(state.log.begin(), notes.begin(), notes.end());
  if (structure_out) *structure_out = std::move(ms);
  return state;
}

}  // namespace treepack
