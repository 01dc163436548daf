#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treepack/generators.hpp"
#include "treepack/holes.hpp"
#include "treepack/scenario.hpp"
#include "treepack/verify.hpp"

using namespace treepack;

namespace {

int cmd_run(const std::string& arg, std::optional<std::uint64_t> seed, std::string out) {
  Scenario sc = load_scenario(arg);
  if (seed) sc.seed = *seed;
  if (out.empty()) out = "out/" + sc.name;
  auto res = run_scenario(sc);
  write_artifacts(res, out, sc.kind == "holes-gnp" ? "holes.csv" : "coverage.csv");
  std::cout << res.csv;
  if (!res.audit_ok) {
    std::cerr << "audit failed: " << res.report["audit"].dump() << "\n";
    return 1;
  }
  return 0;
}

int cmd_audit(const std::string& graph_path, const std::string& packing_path, const std::string& hub_path,
              int hub_limit) {
  Graph g = load_graph(graph_path);
  Graph hub = hub_path.empty() ? Graph(g.vertex_count()) : load_graph(hub_path);
  std::ifstream in(packing_path);
  if (!in) throw IoError("cannot open " + packing_path);
  nlohmann::json js;
  try {
    js = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("packing: ") + e.what());
  }
  auto st = state_from_json(js);
  auto rep = check_packing(g, hub, st);
  std::cout << rep.to_json().dump(2) << "\n";
  bool ok = rep.ok() && (hub_limit <= 0 || rep.hub_usage_max <= hub_limit);
  if (!ok) {
    for (const auto& d : rep.duplicated) std::cerr << "duplicated edge " << d.a << " " << d.b << "\n";
    for (const auto& s : rep.invalid_images) std::cerr << s << "\n";
    if (hub_limit > 0 && rep.hub_usage_max > hub_limit)
      std::cerr << "hub usage " << rep.hub_usage_max << " exceeds " << hub_limit << "\n";
  }
  return ok ? 0 : 1;
}

Graph generate(const std::string& family, const std::vector<double>& p, std::uint64_t seed) {
  auto need = [&](std::size_t k) {
    if (p.size() != k) throw ParameterError("gen " + family + ": expects " + std::to_string(k) + " parameters");
  };
  auto as_int = [](double x) { return static_cast<int>(std::lround(x)); };
  if (family == "gnp") {
    need(2);
    return erdos_renyi(as_int(p[0]), p[1], seed);
  }
  if (family == "complete") {
    need(1);
    return complete(as_int(p[0]));
  }
  if (family == "empty") {
    need(1);
    return empty_graph(as_int(p[0]));
  }
  if (family == "complete-bipartite") {
    need(2);
    return complete_bipartite(as_int(p[0]), as_int(p[1]));
  }
  if (family == "two-cliques") {
    need(1);
    return two_cliques(as_int(p[0]));
  }
  if (family == "unbalanced") {
    need(2);
    return unbalanced_noisy_bipartite(as_int(p[0]), p[1], seed);
  }
  if (family == "ternary") {
    need(1);
    return ternary_tree(as_int(p[0]));
  }
  if (family == "perturbed-two-cliques") {
    need(2);
    return perturbed({two_cliques(as_int(p[0])), p[1], seed});
  }
  throw ParameterError("gen: unknown family '" + family + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-disjoint tree packing toolkit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario (built-in name or file) and write artifacts");
  std::string scenario, out;
  std::uint64_t seed_value = 0;
  run->add_option("scenario", scenario, "smoke | planted | holes-gnp | path to a key = value file")->required();
  auto* seed_opt = run->add_option("--seed", seed_value, "Override the scenario seed");
  run->add_option("--out", out, "Output directory (default out/<name>)");

  auto* audit = app.add_subcommand("audit", "Check a packing file against a host graph");
  std::string graph_path, packing_path, hub_path;
  int hub_limit = 0;
  audit->add_option("graph", graph_path, "Host graph file")->required();
  audit->add_option("packing", packing_path, "Packing JSON written by run")->required();
  audit->add_option("--hub", hub_path, "Hub graph file whose edges trees may also use");
  audit->add_option("--hub-limit", hub_limit, "Fail when a hub vertex has a larger image degree");

  auto* gen = app.add_subcommand("gen", "Write a generated graph");
  std::string family, gen_out;
  std::vector<double> params;
  std::uint64_t gen_seed = 0;
  gen->add_option("family",
                  family, "gnp n p | complete n | empty n | complete-bipartite a b | two-cliques m | "
                          "unbalanced n xi | ternary h | perturbed-two-cliques m p")
      ->required();
  gen->add_option("params", params, "Family parameters");
  gen->add_option("--seed", gen_seed, "Seed for random families");
  gen->add_option("--out", gen_out, "Output file (default stdout)");

  auto* alpha = app.add_subcommand("alpha-tilde", "Bi-independence number: exact or sampled upper evidence");
  std::string alpha_graph;
  bool exact = false;
  std::vector<int> sample;
  std::uint64_t alpha_seed = 0;
  alpha->add_option("graph", alpha_graph, "Graph file")->required();
  auto* exact_flag = alpha->add_flag("--exact", exact, "Exact value (small graphs only)");
  auto* sample_opt = alpha->add_option("--sample", sample, "r trials: look for a hole of total size r")->expected(2);
  exact_flag->excludes(sample_opt);
  alpha->add_option("--seed", alpha_seed, "Sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<std::uint64_t> seed;
      if (*seed_opt) seed = seed_value;
      return cmd_run(scenario, seed, out);
    }
    if (*audit) return cmd_audit(graph_path, packing_path, hub_path, hub_limit);
    if (*gen) {
      Graph g = generate(family, params, gen_seed);
      if (gen_out.empty()) {
        write_graph(std::cout, g);
      } else {
        save_graph(gen_out, g);
      }
      return 0;
    }
    if (*alpha) {
      Graph g = load_graph(alpha_graph);
      if (!sample.empty()) {
        auto v = bi_independence_upper_sample(g, sample[0], sample[1], alpha_seed);
        nlohmann::json js{{"r", sample[0]}, {"trials", v.trials}, {"hole_found", !v.refuted}};
        if (v.witness) js["witness"] = {{"S", v.witness->first}, {"T", v.witness->second}};
        std::cout << js.dump() << "\n";
      } else {
        std::cout << nlohmann::json{{"alpha_tilde", bi_independence_exact(g)}}.dump() << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
