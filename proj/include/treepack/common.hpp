#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace treepack {

using Vertex = int;
using VertexSet = std::vector<Vertex>;
using Rng = std::mt19937_64;

// Error kinds surfaced by the library. Each carries a short machine tag so
// reports and the CLI can classify failures without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};
struct SizeError : Error {
  explicit SizeError(const std::string& m) : Error("size", m) {}
};
struct ProbabilisticFailure : Error {
  ProbabilisticFailure(const std::string& m, int attempts)
      : Error("probabilistic-failure", m + " (attempts=" + std::to_string(attempts) + ")"),
        attempts(attempts) {}
  int attempts;
};
struct RegularityViolation : Error {
  explicit RegularityViolation(const std::string& m) : Error("regularity-violation", m) {}
};
struct StructuralError : Error {
  StructuralError(const std::string& m, int achievable)
      : Error("structural", m), achievable(achievable) {}
  int achievable;
};
struct InternalError : Error {
  explicit InternalError(const std::string& m) : Error("internal", m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// splitmix64 finalizer; used to derive independent seeds from (seed, counter).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t counter = 0) {
  return Rng(mix_seed(seed, counter));
}

// Uniform integer in [lo, hi]. Rejection sampling keeps results identical
// across standard library implementations.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct elements drawn uniformly from v (order random).
template <class T>
std::vector<T> sample_without_replacement(const std::vector<T>& v, std::size_t k, Rng& rng) {
  std::vector<T> pool = v;
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = static_cast<std::size_t>(
        uniform_int(rng, static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

inline VertexSet iota_set(int n, int start = 0) {
  VertexSet v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = start + i;
  return v;
}

}  // namespace treepack
