#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "treepack/common.hpp"

namespace treepack {

// Parameters of the packing pipeline. Desk-scale defaults; the asymptotic
// ordering 1/n < eta < eps < xi < 1/t < nu, alpha is checked by validate().
struct PipelineConfig {
  double alpha = 0.5;
  double nu = 0.25;
  double xi = 0.08;
  double eta = 0.01;
  double epsilon = 0.05;
  double d = 0.3;
  int Delta = 4;
  int t = 8;
  int M = 20;
  int r = 2;
  int q = 8;
  double zeta = 0.1;
  std::uint64_t seed = 0;

  // Desk-scale knobs. Zero or negative means "derive from the formula".
  int piece_size = 0;         // subtree piece parameter; formula ceil(M^{-1/3} n)
  int child_reach = 0;        // required unused neighbours of a child in W'
  double hub_share = -1;      // fraction of each part sent to U when carving
  bool min_usage_choice = false;  // deterministic least-used vertex instead of uniform choice
  bool pad_small_trees = true;
  int slot_budget = 50;
  int connector_tries = 40;   // candidate images tried for a piece root
  int blowup_budget = 30;     // attempts per batch
  int placement_budget = 50;  // attempts per batch placement inside H
  double hierarchy_slack = 1.0;  // each ratio in the chain must stay below this

  int piece_size_for(int n) const {
    if (piece_size > 0) return piece_size;
    return std::max(1, static_cast<int>(std::ceil(std::pow(static_cast<double>(M), -1.0 / 3.0) * n - 1e-9)));
  }

  // M^2 neighbours are only meaningful once n >= M^6; below that the reach is
  // max(2 Delta, ceil(M^2 n / M^6)).
  int child_reach_for(int n) const {
    if (child_reach > 0) return child_reach;
    double paper_n = std::pow(static_cast<double>(M), 6.0);
    int scaled = static_cast<int>(std::ceil(static_cast<double>(M) * M * n / paper_n - 1e-9));
    return std::max(2 * Delta, scaled);
  }

  // Hard errors throw; soft departures from the hierarchy come back as log lines.
  std::vector<std::string> validate(int n = 0) const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0)) throw ParameterError(std::string("config: ") + name + " must be positive");
    };
    positive(alpha, "alpha");
    positive(nu, "nu");
    positive(xi, "xi");
    positive(eta, "eta");
    positive(epsilon, "epsilon");
    positive(d, "d");
    positive(zeta, "zeta");
    if (alpha > 1 || d > 1 || nu >= 1 || epsilon >= 1) throw ParameterError("config: alpha, d <= 1 and nu, eps < 1");
    if (Delta < 2) throw ParameterError("config: Delta must be >= 2");
    if (t < 1 || M < 1 || r < 1) throw ParameterError("config: t, M, r must be >= 1");
    if (q < Delta) throw ParameterError("config: q must be >= Delta so a forest fits in a q-regular graph");
    if (3 * zeta >= 1) throw ParameterError("config: zeta must be < 1/3");
    std::vector<std::string> log;
    auto chain = [&](double small, double big, const char* a, const char* b) {
      if (small >= big * hierarchy_slack) {
        std::ostringstream os;
        os << "hierarchy: " << a << "=" << small << " is not below " << b << "=" << big;
        log.push_back(os.str());
      }
    };
    if (n > 0) chain(1.0 / n, eta, "1/n", "eta");
    chain(eta, epsilon, "eta", "eps");
    chain(epsilon, xi, "eps", "xi");
    chain(xi, 1.0 / t, "xi", "1/t");
    chain(1.0 / t, std::min(nu, alpha), "1/t", "min(nu, alpha)");
    chain(epsilon, 1.0 / q, "eps", "1/q");
    chain(1.0 / q, zeta, "1/q", "zeta");
    chain(zeta, std::min(d, nu), "zeta", "min(d, nu)");
    if (1.0 / std::cbrt(static_cast<double>(t)) >= alpha)
      log.push_back("kappa formula is non-positive: t^{-1/3} >= alpha");
    if (n > 0) {
      if (piece_size <= 0) {
        std::ostringstream os;
        os << "piece size derived from M^{-1/3} n = " << piece_size_for(n);
        log.push_back(os.str());
      }
      if (child_reach <= 0) {
        std::ostringstream os;
        os << "child reach M^2 replaced by max(2 Delta, ceil(M^2 n / M^6)) = " << child_reach_for(n);
        log.push_back(os.str());
      }
    }
    return log;
  }

  nlohmann::json to_json() const {
    return {{"alpha", alpha},     {"nu", nu},
            {"xi", xi},           {"eta", eta},
            {"epsilon", epsilon}, {"d", d},
            {"Delta", Delta},     {"t", t},
            {"M", M},             {"r", r},
            {"q", q},             {"zeta", zeta},
            {"seed", seed},       {"piece_size", piece_size},
            {"child_reach", child_reach}, {"hub_share", hub_share},
            {"min_usage_choice", min_usage_choice}, {"pad_small_trees", pad_small_trees}};
  }
};

}  // namespace treepack
