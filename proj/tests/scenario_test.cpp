#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "treepack/scenario.hpp"

namespace treepack {
namespace {

TEST(ScenarioParse, KeysCommentsAndSections) {
  auto sc = parse_scenario(
      "# comment\n[host]\nname = demo ; trailing\nkind = planted\npairs = 2\nn_bullet=60\n\n[config]\nepsilon = 0.2\n"
      "min_usage_choice = yes\n");
  EXPECT_EQ(sc.name, "demo");
  EXPECT_EQ(sc.pairs, 2);
  EXPECT_EQ(sc.n_bullet, 60);
  EXPECT_DOUBLE_EQ(sc.cfg.epsilon, 0.2);
  EXPECT_TRUE(sc.cfg.min_usage_choice);
  EXPECT_EQ(sc.values.at("n_bullet"), "60");
}

TEST(ScenarioParse, Errors) {
  EXPECT_THROW(parse_scenario("pairz = 2\n"), IoError);
  EXPECT_THROW(parse_scenario("pairs = two\n"), IoError);
  EXPECT_THROW(parse_scenario("pairs 2\n"), IoError);
  EXPECT_THROW(parse_scenario("kind = other\n"), IoError);
  EXPECT_THROW(parse_scenario("pad_small_trees = maybe\n"), IoError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.ini"), IoError);
}

TEST(ScenarioParse, BuiltinsParse) {
  for (const auto& [name, text] : builtin_scenarios()) {
    auto sc = load_scenario(name);
    EXPECT_EQ(sc.name, name);
  }
}

TEST(ScenarioTrees, EdgeBudgetSplitsIntoFullTreesAndRemainder) {
  Scenario sc;
  sc.tree_size = 540;
  sc.total_edges = 20250;
  auto trees = scenario_trees(sc);
  ASSERT_EQ(trees.size(), 38u);
  long long e = 0;
  for (const auto& t : trees) {
    e += t.edge_count();
    EXPECT_LE(t.max_degree(), 3);
  }
  EXPECT_EQ(e, 20250);
  EXPECT_EQ(trees.back().vertex_count(), 308);
}

TEST(ScenarioRun, SmokeSucceeds) {
  auto res = run_scenario(load_scenario("smoke"));
  EXPECT_TRUE(res.audit_ok);
  EXPECT_GT(res.report["audit"]["coverage"].get<double>(), 0.0);
  EXPECT_TRUE(res.report["audit"]["edge_disjoint"].get<bool>());
  std::istringstream csv(res.csv);
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "scenario,seed,n,r,kappa,coverage,hub_usage_max,failures");
  EXPECT_EQ(row.rfind("smoke,0,", 0), 0u);
}

TEST(ScenarioRun, SameSeedSameArtifacts) {
  auto sc = load_scenario("smoke");
  sc.seed = 3;
  auto a = run_scenario(sc);
  auto b = run_scenario(sc);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.packing.dump(), b.packing.dump());
}

TEST(ScenarioRun, TooManyTreeEdgesIsPreconditionError) {
  auto sc = load_scenario("smoke");
  sc.tree_count = 40;
  EXPECT_THROW(run_scenario(sc), ParameterError);
}

TEST(ScenarioRun, HolesGnpWritesOneRowPerSeed) {
  auto sc = parse_scenario("name = h\nkind = holes-gnp\ngnp_n = 400\ngnp_c = 30\nhole_s = 100\nhole_t = 100\n"
                           "hole_samples = 20\nhole_seeds = 3\n");
  auto res = run_scenario(sc);
  int lines = 0;
  std::istringstream is(res.csv);
  for (std::string l; std::getline(is, l);) ++lines;
  EXPECT_EQ(lines, 4);
  EXPECT_EQ(res.report["samples"].size(), 3u);
  EXPECT_EQ(res.report["holes_total"].get<long long>(), 0);
}

TEST(ScenarioRun, ArtifactsWritten) {
  auto dir = std::filesystem::temp_directory_path() / "treepack_scenario_test";
  std::filesystem::remove_all(dir);
  auto res = run_scenario(load_scenario("smoke"));
  write_artifacts(res, dir.string(), "coverage.csv");
  for (const char* f : {"report.json", "coverage.csv", "failures.jsonl", "packing.json", "graph.txt", "hub.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "packing.json");
  auto st = state_from_json(nlohmann::json::parse(in));
  auto rep = check_packing(load_graph((dir / "graph.txt").string()), load_graph((dir / "hub.txt").string()), st);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.to_json()["coverage"], res.report["audit"]["coverage"]);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace treepack
