#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "treepack/config.hpp"
#include "treepack/generators.hpp"
#include "treepack/holes.hpp"
#include "treepack/packing.hpp"
#include "treepack/structure.hpp"
#include "treepack/verify.hpp"

namespace treepack {

// Flat key = value scenario. Unknown keys are a parse error so typos do not
// silently fall back to defaults.
struct Scenario {
  std::string name = "unnamed";
  std::string kind = "planted";  // planted | holes-gnp
  std::uint64_t seed = 0;

  // planted host
  int pairs = 1;
  int n_bullet = 40;
  int hub_block = 10;
  double density = 0.5;
  double reserve_p = 0.5;
  int alpha_trials = 50;  // greedy hole samples on the hub graph; 0 skips

  // trees: tree_count trees of tree_size vertices, or, when total_edges > 0,
  // trees of tree_size until the edge budget is spent (last tree shorter)
  int tree_count = 2;
  int tree_size = 40;
  long long total_edges = 0;
  int tree_delta = 3;

  // holes-gnp
  int gnp_n = 3000;
  double gnp_c = 64;
  int hole_s = 750;
  int hole_t = 750;
  int hole_samples = 200;
  int hole_seeds = 10;

  PipelineConfig cfg;
  std::map<std::string, std::string> values;  // every key as read, echoed into the report
};

namespace scenario_detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail() || !(is >> std::ws).eof()) throw IoError("scenario: bad value for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw IoError("scenario: bad boolean for " + key + ": '" + v + "'");
}

inline void apply(Scenario& sc, const std::string& key, const std::string& v) {
  using F = std::function<void(const std::string&)>;
  auto i = [&](auto& field) -> F {
    return [&field, key](const std::string& s) { field = parse_number<std::decay_t<decltype(field)>>(key, s); };
  };
  auto b = [&](bool& field) -> F { return [&field, key](const std::string& s) { field = parse_bool(key, s); }; };
  auto& c = sc.cfg;
  const std::map<std::string, F> table{
      {"name", [&](const std::string& s) { sc.name = s; }},
      {"kind", [&](const std::string& s) { sc.kind = s; }},
      {"seed", i(sc.seed)},
      {"pairs", i(sc.pairs)},
      {"n_bullet", i(sc.n_bullet)},
      {"hub_block", i(sc.hub_block)},
      {"density", i(sc.density)},
      {"reserve_p", i(sc.reserve_p)},
      {"alpha_trials", i(sc.alpha_trials)},
      {"tree_count", i(sc.tree_count)},
      {"tree_size", i(sc.tree_size)},
      {"total_edges", i(sc.total_edges)},
      {"tree_delta", i(sc.tree_delta)},
      {"gnp_n", i(sc.gnp_n)},
      {"gnp_c", i(sc.gnp_c)},
      {"hole_s", i(sc.hole_s)},
      {"hole_t", i(sc.hole_t)},
      {"hole_samples", i(sc.hole_samples)},
      {"hole_seeds", i(sc.hole_seeds)},
      {"alpha", i(c.alpha)},
      {"nu", i(c.nu)},
      {"xi", i(c.xi)},
      {"eta", i(c.eta)},
      {"epsilon", i(c.epsilon)},
      {"d", i(c.d)},
      {"Delta", i(c.Delta)},
      {"t", i(c.t)},
      {"M", i(c.M)},
      {"r", i(c.r)},
      {"q", i(c.q)},
      {"zeta", i(c.zeta)},
      {"piece_size", i(c.piece_size)},
      {"child_reach", i(c.child_reach)},
      {"hub_share", i(c.hub_share)},
      {"min_usage_choice", b(c.min_usage_choice)},
      {"pad_small_trees", b(c.pad_small_trees)},
      {"slot_budget", i(c.slot_budget)},
      {"connector_tries", i(c.connector_tries)},
      {"blowup_budget", i(c.blowup_budget)},
      {"placement_budget", i(c.placement_budget)},
  };
  auto it = table.find(key);
  if (it == table.end()) throw IoError("scenario: unknown key '" + key + "'");
  it->second(v);
  sc.values[key] = v;
}

}  // namespace scenario_detail

// Lines are "key = value"; '#' and ';' start comments; [section] headers are
// ignored.
inline Scenario parse_scenario(std::istream& is, Scenario sc = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.resize(cut);
    line = scenario_detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("scenario: line " + std::to_string(lineno) + " has no '='");
    scenario_detail::apply(sc, scenario_detail::trim(line.substr(0, eq)), scenario_detail::trim(line.substr(eq + 1)));
  }
  if (sc.kind != "planted" && sc.kind != "holes-gnp") throw IoError("scenario: unknown kind '" + sc.kind + "'");
  return sc;
}

inline Scenario parse_scenario(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(is);
}

inline const std::map<std::string, std::string>& builtin_scenarios() {
  static const std::map<std::string, std::string> table{
      {"smoke",
       "name = smoke\nkind = planted\npairs = 1\nn_bullet = 40\nhub_block = 12\ndensity = 0.5\nreserve_p = 0.5\n"
       "tree_count = 2\ntree_size = 40\ntree_delta = 3\nDelta = 3\nnu = 0.3\nd = 0.5\nepsilon = 0.15\nq = 3\n"
       "zeta = 0.15\n"},
      {"planted",
       "name = planted\nkind = planted\npairs = 3\nn_bullet = 150\nhub_block = 30\ndensity = 0.5\nreserve_p = 0.5\n"
       "tree_size = 540\ntotal_edges = 20250\ntree_delta = 3\nDelta = 3\nnu = 0.3\nd = 0.5\nepsilon = 0.15\n"
       "q = 3\nzeta = 0.15\n"},
      {"holes-gnp",
       "name = holes-gnp\nkind = holes-gnp\ngnp_n = 3000\ngnp_c = 64\nhole_s = 750\nhole_t = 750\n"
       "hole_samples = 200\nhole_seeds = 10\n"},
  };
  return table;
}

// A built-in name or a path to a scenario file.
inline Scenario load_scenario(const std::string& arg) {
  const auto& table = builtin_scenarios();
  if (auto it = table.find(arg); it != table.end()) return parse_scenario(it->second);
  std::ifstream in(arg);
  if (!in) throw IoError("cannot open scenario '" + arg + "'");
  return parse_scenario(in);
}

inline std::vector<RootedTree> scenario_trees(const Scenario& sc) {
  if (sc.tree_size < 2) throw ParameterError("scenario: tree_size must be >= 2");
  std::vector<RootedTree> trees;
  auto make = [&](int size) {
    trees.push_back(random_tree(size, sc.tree_delta, mix_seed(sc.seed, 1000 + trees.size())));
  };
  if (sc.total_edges > 0) {
    long long left = sc.total_edges;
    while (left >= sc.tree_size - 1) {
      make(sc.tree_size);
      left -= sc.tree_size - 1;
    }
    if (left > 0) make(static_cast<int>(left) + 1);
  } else {
    for (int k = 0; k < sc.tree_count; ++k) make(sc.tree_size);
  }
  return trees;
}

struct RunResult {
  nlohmann::json report;
  std::string csv;       // header line and one row per run
  std::string failures;  // JSON lines
  nlohmann::json packing;
  std::optional<Graph> g, hub;
  bool audit_ok = true;
};

inline std::string csv_header() { return "scenario,seed,n,r,kappa,coverage,hub_usage_max,failures\n"; }

namespace scenario_detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << x;
  return os.str();
}

inline RunResult run_planted(const Scenario& sc) {
  PlantedSpec ps;
  ps.pairs = sc.pairs;
  ps.n_bullet = sc.n_bullet;
  ps.hub_block = sc.hub_block;
  ps.density = sc.density;
  ps.reserve_p = sc.reserve_p;
  ps.seed = sc.seed;
  auto pi = planted_instance(ps);
  auto trees = scenario_trees(sc);
  PipelineConfig cfg = sc.cfg;
  cfg.seed = sc.seed;

  nlohmann::json hub_alpha = nullptr;
  if (sc.alpha_trials > 0) {
    // Greedy search for a balanced hole covering a quarter of the hub.
    VertexSet U = pi.structure.matchings[0].hub();
    Graph hu(static_cast<int>(U.size()));
    for (std::size_t a = 0; a < U.size(); ++a)
      for (std::size_t b = a + 1; b < U.size(); ++b)
        if (pi.hub.has_edge(U[a], U[b])) hu.add_edge(static_cast<int>(a), static_cast<int>(b));
    int r = static_cast<int>(U.size()) / 4;
    auto v = bi_independence_upper_sample(hu, r, sc.alpha_trials, mix_seed(sc.seed, 77));
    hub_alpha = {{"hub_vertices", U.size()}, {"r", r}, {"trials", v.trials}, {"no_hole_found", v.refuted}};
  }

  auto state = pack_theorem(pi.g, pi.reserve, pi.structure, trees, cfg);
  auto rep = check_packing(pi.g, pi.hub, state);
  int hub_limit = cfg.Delta * cfg.M;
  long long tree_edges = 0;
  for (const auto& t : trees) tree_edges += t.edge_count();

  RunResult out;
  out.audit_ok = rep.ok() && rep.hub_usage_max <= hub_limit;
  out.report = {{"scenario", sc.values},
                {"name", sc.name},
                {"kind", sc.kind},
                {"seed", sc.seed},
                {"config", cfg.to_json()},
                {"host", {{"vertices", pi.g.vertex_count()},
                          {"g_edges", pi.g.edge_count()},
                          {"hub_edges", pi.hub.edge_count()},
                          {"n_bullet", sc.n_bullet},
                          {"r", sc.pairs}}},
                {"hub_alpha_sample", hub_alpha},
                {"kappa", pi.structure.kappa},
                {"trees", {{"count", trees.size()}, {"edges", tree_edges}, {"packed", state.packed_count()}}},
                {"audit", rep.to_json()},
                {"hub_usage_limit", hub_limit},
                {"audit_ok", out.audit_ok},
                {"failures", state.failures.size()},
                {"log", state.log},
                {"stats", state.stats}};
  out.csv = csv_header() + sc.name + "," + std::to_string(sc.seed) + "," + std::to_string(pi.g.vertex_count()) + "," +
            std::to_string(sc.pairs) + "," + std::to_string(pi.structure.kappa) + "," + fmt(rep.coverage) + "," +
            std::to_string(rep.hub_usage_max) + "," + std::to_string(state.failures.size()) + "\n";
  out.failures = state.failures_jsonl();
  out.packing = state.to_json();
  out.g = pi.g;
  out.hub = pi.hub;
  return out;
}

inline RunResult run_holes(const Scenario& sc) {
  if (sc.gnp_n < 2 || sc.hole_s + sc.hole_t > sc.gnp_n) throw ParameterError("holes-gnp: s + t must fit in n");
  RunResult out;
  out.csv = "scenario,seed,n,C,s,t,samples,holes\n";
  nlohmann::json rows = nlohmann::json::array();
  long long total = 0;
  for (int k = 0; k < sc.hole_seeds; ++k) {
    std::uint64_t seed = sc.seed + static_cast<std::uint64_t>(k);
    Graph g = erdos_renyi(sc.gnp_n, sc.gnp_c / sc.gnp_n, seed);
    Rng rng = make_rng(seed, 1);
    VertexSet all = iota_set(sc.gnp_n);
    int holes = 0;
    for (int j = 0; j < sc.hole_samples; ++j) {
      VertexSet pick = sample_without_replacement(all, static_cast<std::size_t>(sc.hole_s + sc.hole_t), rng);
      VertexSet S(pick.begin(), pick.begin() + sc.hole_s), T(pick.begin() + sc.hole_s, pick.end());
      holes += is_hole(g, S, T);
    }
    total += holes;
    rows.push_back({{"seed", seed}, {"holes", holes}, {"edges", g.edge_count()}});
    out.csv += sc.name + "," + std::to_string(seed) + "," + std::to_string(sc.gnp_n) + "," + fmt(sc.gnp_c) + "," +
               std::to_string(sc.hole_s) + "," + std::to_string(sc.hole_t) + "," + std::to_string(sc.hole_samples) +
               "," + std::to_string(holes) + "\n";
  }
  out.report = {{"scenario", sc.values}, {"name", sc.name}, {"kind", sc.kind}, {"seed", sc.seed},
                {"samples", rows},       {"holes_total", total}};
  return out;
}

}  // namespace scenario_detail

inline RunResult run_scenario(const Scenario& sc) {
  if (sc.kind == "holes-gnp") return scenario_detail::run_holes(sc);
  return scenario_detail::run_planted(sc);
}

// report.json, coverage.csv (or holes.csv), failures.jsonl and, for packing
// runs, packing.json plus the host graphs for the standalone auditor.
inline void write_artifacts(const RunResult& res, const std::string& dir, const std::string& csv_name) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& file, const std::string& text) {
    std::ofstream os(std::filesystem::path(dir) / file, std::ios::binary);
    if (!os) throw IoError("cannot write " + file + " in " + dir);
    os << text;
  };
  put("report.json", res.report.dump(2) + "\n");
  put(csv_name, res.csv);
  put("failures.jsonl", res.failures);
  if (!res.packing.is_null()) put("packing.json", res.packing.dump() + "\n");
  if (res.g) put("graph.txt", graph_to_string(*res.g));
  if (res.hub) put("hub.txt", graph_to_string(*res.hub));
}

}  // namespace treepack
