#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "framecs/linop.hpp"

namespace framecs {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// counter-based stream key: root seed and a path of counters -> independent seed
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(root ^ 0x6a09e667f3bcc909ULL);
  for (auto c : path) h = mix64(h ^ mix64(c + 0x3c6ef372fe94f82bULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path));
}

inline RVec gaussian_real(Rng& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  RVec v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = nd(rng);
  return v;
}

inline Vec gaussian_complex(Rng& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  Vec v(static_cast<Eigen::Index>(n));
  for (auto& x : v) {
    double a = nd(rng);
    double b = nd(rng);
    x = cplx(a, b) / std::sqrt(2.0);
  }
  return v;
}

// k distinct values from [0, n), sorted (partial Fisher-Yates)
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  require(k <= n, ErrorKind::invalid_counts, "cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, n - 1);
    std::swap(pool[i], pool[u(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace framecs
