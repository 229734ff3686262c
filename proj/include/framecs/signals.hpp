#pragma once

#include <cstdint>
#include <vector>

#include "framecs/random.hpp"
#include "framecs/transforms.hpp"

namespace framecs {

// number of frame coefficients above rel_tol * max
inline std::size_t analysis_support_size(const Vec& Dx, double rel_tol = 1e-10) {
  double m = Dx.cwiseAbs().maxCoeff();
  if (m == 0) return 0;
  std::size_t c = 0;
  for (auto v : Dx)
    if (std::abs(v) > rel_tol * m) ++c;
  return c;
}

inline IndexSet analysis_support(const Vec& Dx, double rel_tol = 1e-10) {
  double m = Dx.size() ? Dx.cwiseAbs().maxCoeff() : 0.0;
  std::vector<std::size_t> s;
  for (Eigen::Index i = 0; i < Dx.size(); ++i)
    if (m > 0 && std::abs(Dx(i)) > rel_tol * m) s.push_back(static_cast<std::size_t>(i) + 1);
  return IndexSet(std::move(s), static_cast<std::size_t>(Dx.size()));
}

// piecewise constant vector of length n: breakpoints are 0-based positions b (value changes between b-1 and b)
inline RVec piecewise_constant(std::size_t n, const std::vector<std::size_t>& breaks, const std::vector<double>& levels) {
  RVec x(static_cast<Eigen::Index>(n));
  std::size_t piece = 0;
  for (std::size_t j = 0; j < n; ++j) {
    while (piece < breaks.size() && breaks[piece] <= j) ++piece;
    x(j) = levels[piece];
  }
  return x;
}

// random piecewise-constant vector: breakpoint count uniform in [1, max_breaks], Gaussian levels
inline RVec random_piecewise_constant(std::size_t n, std::size_t max_breaks, Rng& rng) {
  max_breaks = std::max<std::size_t>(1, std::min(max_breaks, n - 1));
  std::uniform_int_distribution<std::size_t> cnt(1, max_breaks);
  std::size_t k = cnt(rng);
  auto pos = sample_without_replacement(rng, n - 1, k);
  for (auto& b : pos) b += 1;
  RVec lv = gaussian_real(rng, k + 1);
  return piecewise_constant(n, pos, {lv.data(), lv.data() + lv.size()});
}

struct GeneratedSignal {
  RVec x;
  std::size_t analysis_nnz = 0;
  std::size_t attempts = 0;
};

// Greedy insertion of steps on [b, end) until ||Dx||_0 hits `target` exactly; b is drawn from `candidates`
// (0-based). Deterministic given the seed.
inline GeneratedSignal grow_to_sparsity(const FastHaar& D, const RVec& base, const std::vector<std::size_t>& candidates,
                                        std::size_t end, std::size_t target, std::uint64_t seed,
                                        std::size_t max_restarts = 200) {
  for (std::size_t attempt = 0; attempt < max_restarts; ++attempt) {
    auto rng = make_rng(seed, {attempt});
    RVec x = base;
    std::size_t nnz = analysis_support_size(D.apply(x.cast<cplx>()));
    std::size_t stale = 0;
    while (nnz < target && stale < 4 * candidates.size()) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      std::size_t b = candidates[pick(rng)];
      std::normal_distribution<double> nd;
      double h = nd(rng);
      if (std::abs(h) < 0.25) h = std::copysign(0.25, h);
      RVec trial = x;
      for (std::size_t j = b; j < end; ++j) trial(j) += h;
      std::size_t t = analysis_support_size(D.apply(trial.cast<cplx>()));
      if (t > nnz && t <= target) {
        x = trial;
        nnz = t;
        stale = 0;
      } else {
        ++stale;
      }
    }
    if (nnz == target) return {x, nnz, attempt + 1};
  }
  fail(ErrorKind::invalid_input, "could not reach the requested analysis sparsity");
}

// coarse-scale-heavy test signal (x2 analog): nonzero mean plus a few jumps at multiples of `grid`
inline GeneratedSignal coarse_heavy_signal(int p, std::size_t target, std::uint64_t seed, std::size_t grid = 1) {
  FastHaar D(p, true);
  const std::size_t n = std::size_t(1) << p;
  auto rng = make_rng(seed, {0xC0A});
  std::normal_distribution<double> nd(0.0, 1.0);
  RVec base = RVec::Constant(static_cast<Eigen::Index>(n), 2.0 + std::abs(nd(rng)));
  std::vector<std::size_t> cand;
  for (std::size_t b = grid; b < n; b += grid) cand.push_back(b);
  return grow_to_sparsity(D, base, cand, n, target, derive_seed(seed, {0xC0A, 1}));
}

// fine-scale-heavy test signal (x1 analog): zero outside the 1-based window [lo, hi], many short pieces inside
inline GeneratedSignal windowed_signal(int p, std::size_t lo, std::size_t hi, std::size_t target, std::uint64_t seed) {
  FastHaar D(p, true);
  const std::size_t n = std::size_t(1) << p;
  require(lo >= 1 && hi <= n && lo < hi, ErrorKind::invalid_input, "window outside the signal");
  auto rng = make_rng(seed, {0xF1E});
  std::normal_distribution<double> nd(0.0, 1.0);
  RVec base = RVec::Zero(static_cast<Eigen::Index>(n));
  double v = 1.0 + std::abs(nd(rng));
  for (std::size_t j = lo - 1; j < hi; ++j) base(j) = v;
  std::vector<std::size_t> cand;
  for (std::size_t b = lo; b < hi; ++b) cand.push_back(b);
  return grow_to_sparsity(D, base, cand, hi, target, derive_seed(seed, {0xF1E, 1}));
}

}  // namespace framecs
