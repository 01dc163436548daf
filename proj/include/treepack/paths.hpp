#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "treepack/graph.hpp"

namespace treepack {

// Randomized rotation-extension search for a spanning path. Each attempt
// starts at a random vertex, extends from the free end while it has an
// unvisited neighbour and otherwise rotates the path at a random neighbour of
// the end. Returns the host vertices in path order, or nothing when every
// attempt runs out of steps.
inline std::optional<VertexSet> find_spanning_path(const Graph& host, std::uint64_t seed, int attempts = 20,
                                                   long long steps_per_attempt = 0) {
  int n = host.vertex_count();
  if (n == 0) return VertexSet{};
  if (steps_per_attempt <= 0) steps_per_attempt = 50LL * n * n;
  for (int at = 0; at < attempts; ++at) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(at));
    VertexSet path{static_cast<int>(uniform_int(rng, 0, n - 1))};
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    pos[path[0]] = 0;
    for (long long step = 0; step < steps_per_attempt && static_cast<int>(path.size()) < n; ++step) {
      int end = path.back();
      VertexSet fresh, inside;
      for (Vertex u : host.neighbors(end)) (pos[u] < 0 ? fresh : inside).push_back(u);
      if (!fresh.empty()) {
        int u = fresh[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(fresh.size()) - 1))];
        pos[u] = static_cast<int>(path.size());
        path.push_back(u);
        continue;
      }
      // Rotation: for a neighbour path[k] of the end, reverse path[k+1..].
      int u = inside[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(inside.size()) - 1))];
      int k = pos[u];
      if (k + 1 >= static_cast<int>(path.size()) - 1) continue;
      std::reverse(path.begin() + k + 1, path.end());
      for (std::size_t i = static_cast<std::size_t>(k) + 1; i < path.size(); ++i) pos[path[i]] = static_cast<int>(i);
    }
    if (static_cast<int>(path.size()) == n) return path;
  }
  return std::nullopt;
}

}  // namespace treepack
