#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "framecs/levels.hpp"
#include "framecs/linop.hpp"
#include "framecs/parallel.hpp"
#include "framecs/random.hpp"
#include "framecs/signals.hpp"
#include "framecs/transforms.hpp"

namespace framecs {

// ---- coherence

struct CoherenceReport {
  double mu = 0;
  bool unit_columns = true;
  double max_column_deviation = 0;  // max_j | ||U e_j|| - 1 |
};

inline CoherenceReport coherence(const Mat& U, double tol = 1e-8) {
  require(U.size() > 0, ErrorKind::invalid_dimension, "coherence of an empty matrix");
  CoherenceReport r;
  r.mu = U.cwiseAbs().maxCoeff();
  r.max_column_deviation = (U.colwise().norm().array() - 1.0).abs().maxCoeff();
  r.unit_columns = r.max_column_deviation <= tol;
  return r;
}

inline CoherenceReport coherence(const DenseOperator& U, double tol = 1e-8) { return coherence(U.mat(), tol); }

namespace detail {

// row levels are strict (M_{k-1}, M_k]; column levels stretch the last level to the width
inline void check_block_levels(const Mat& U, const LevelPartition& M, const LevelPartition& N) {
  require(M.total() <= static_cast<std::size_t>(U.rows()), ErrorKind::dimension_mismatch,
          "sampling levels exceed the rows of V D* (" + std::to_string(U.rows()) + ")");
  require(N.lower(N.r()) < static_cast<std::size_t>(U.cols()), ErrorKind::dimension_mismatch,
          "sparsity levels exceed the columns of V D* (" + std::to_string(U.cols()) + ")");
}

inline auto row_block(const Mat& U, const LevelPartition& M, std::size_t k) {
  return U.middleRows(static_cast<Eigen::Index>(M.lower(k)), static_cast<Eigen::Index>(M.size(k)));
}

inline auto col_range(const LevelPartition& N, std::size_t l, const Mat& U) {
  return N.span(l, static_cast<std::size_t>(U.cols()));
}

}  // namespace detail

struct LocalCoherenceMatrix {
  RMat mu;     // mu_{N,M}(k,l)
  RMat block;  // mu(P_Gamma_k U P_Lambda_l)
  RVec row;    // mu(P_Gamma_k U)
  LevelPartition M, N;
  bool truncated = false;  // last sparsity level cut at the column count
};

inline LocalCoherenceMatrix local_coherence(const Mat& U, const LevelPartition& M, const LevelPartition& N) {
  detail::check_block_levels(U, M, N);
  LocalCoherenceMatrix L;
  L.M = M;
  L.N = N;
  L.truncated = N.truncated(static_cast<std::size_t>(U.cols()));
  L.mu = RMat::Zero(M.r(), N.r());
  L.block = RMat::Zero(M.r(), N.r());
  L.row = RVec::Zero(M.r());
  for (std::size_t k = 1; k <= M.r(); ++k) {
    auto rows = detail::row_block(U, M, k);
    L.row(k - 1) = rows.cwiseAbs().maxCoeff();
    for (std::size_t l = 1; l <= N.r(); ++l) {
      auto [lo, hi] = detail::col_range(N, l, U);
      double b = rows.middleCols(lo, hi - lo).cwiseAbs().maxCoeff();
      L.block(k - 1, l - 1) = b;
      L.mu(k - 1, l - 1) = std::sqrt(b * L.row(k - 1));
    }
  }
  return L;
}

inline LocalCoherenceMatrix local_coherence(const Mat& V, const Mat& D, const LevelPartition& M,
                                            const LevelPartition& N) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  return local_coherence(matmul(V, Mat(D.adjoint())), M, N);
}

// ---- sparsity in levels

struct LevelSparsity {
  std::vector<std::size_t> counts;
  IndexSet support;

  bool within(const std::vector<std::size_t>& s) const {
    require(s.size() == counts.size(), ErrorKind::invalid_counts, "one sparsity per level required");
    for (std::size_t k = 0; k < s.size(); ++k)
      if (counts[k] > s[k]) return false;
    return true;
  }
};

inline LevelSparsity level_sparsity(const Vec& x, const LevelPartition& N, double threshold = 0.0) {
  LevelSparsity L;
  L.counts.assign(N.r(), 0);
  std::vector<std::size_t> supp;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) <= threshold) continue;
    auto j = static_cast<std::size_t>(i) + 1;
    supp.push_back(j);
    ++L.counts[N.level_of(j) - 1];
  }
  L.support = IndexSet(std::move(supp), static_cast<std::size_t>(x.size()));
  return L;
}

// l1 mass outside the s_k largest entries of every level; ties keep the lowest index
inline double sN_term_approx(const Vec& x, const std::vector<std::size_t>& s, const LevelPartition& N) {
  require(s.size() == N.r(), ErrorKind::invalid_counts, "one sparsity per level required");
  double tail = 0;
  for (std::size_t k = 1; k <= N.r(); ++k) {
    auto [lo, hi] = N.span(k, static_cast<std::size_t>(x.size()));
    require(s[k - 1] <= static_cast<std::size_t>(std::max<Eigen::Index>(hi - lo, 0)) || lo >= hi,
            ErrorKind::invalid_counts, "s_" + std::to_string(k) + " exceeds the stratum size");
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = lo; i < hi; ++i) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(x(a)) > std::abs(x(b)); });
    for (std::size_t t = s[k - 1]; t < idx.size(); ++t) tail += std::abs(x(idx[t]));
  }
  return tail;
}

// ---- localized sparsity

inline void check_quasi_exponent(double p) {
  require(p > 0 && p <= 1, ErrorKind::invalid_input, "exponent p must lie in (0, 1]");
  double J = std::log2(1.0 / p);
  require(std::abs(J - std::round(J)) < 1e-12, ErrorKind::invalid_input, "exponent p must be a power 2^-J");
}

// smallest constants of one vector: ||z||_p^p <= k_inf ||z||_inf^p and ||z||_p^p <= k_2^{1-p/2} ||z||_2^p
struct VectorKappa {
  double k_inf = 0;
  double k_2 = 0;
  double value() const { return std::max(k_inf, k_2); }
};

// entries below zero_tol * max|z| count as zero
template <class Derived>
VectorKappa vector_kappa(const Eigen::MatrixBase<Derived>& z, double p, double zero_tol = 1e-12) {
  VectorKappa r;
  if (z.size() == 0) return r;
  double mx = z.cwiseAbs().maxCoeff();
  if (mx == 0) return r;
  double cut = zero_tol * mx, n2 = 0, mass = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double a = std::abs(z(i));
    if (a <= cut) continue;
    n2 += a * a;
    mass += p == 1.0 ? a / mx : std::pow(a / mx, p);
  }
  r.k_inf = mass;
  // ||z||_p^p / ||z||_2^p with the max factored out
  double ratio = mass / std::pow(std::sqrt(n2) / mx, p);
  r.k_2 = std::pow(ratio, 1.0 / (1.0 - p / 2.0));
  return r;
}

struct KappaEstimate {
  double p = 1;
  std::vector<double> levels;  // max of the two normalizations
  std::vector<double> levels_inf, levels_2;
  double global = 0, global_inf = 0, global_2 = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::optional<double> eta;  // from kappa_2 = eta^2 s at p = 1
  bool lower_bound = true;
  bool truncated = false;

  double kappa_max() const { return double(levels.size()) * *std::max_element(levels.begin(), levels.end()); }
  double kappa_min() const { return double(levels.size()) * *std::min_element(levels.begin(), levels.end()); }
};

namespace detail {

inline void check_sparsities(const std::vector<std::size_t>& s, const LevelPartition& N, std::size_t ambient) {
  require(s.size() == N.r(), ErrorKind::invalid_counts, "one sparsity per level required");
  for (std::size_t k = 1; k <= N.r(); ++k) {
    auto [lo, hi] = N.span(k, ambient);
    require(s[k - 1] <= static_cast<std::size_t>(std::max<Eigen::Index>(hi - lo, 0)), ErrorKind::invalid_counts,
            "s_" + std::to_string(k) + " = " + std::to_string(s[k - 1]) + " exceeds the stratum size");
  }
}

// uniform support of size s_k inside every level (0-based positions)
inline std::vector<std::size_t> random_level_support(const std::vector<std::size_t>& s, const LevelPartition& N,
                                                     std::size_t ambient, Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= N.r(); ++k) {
    auto [lo, hi] = N.span(k, ambient);
    auto pick = sample_without_replacement(rng, static_cast<std::size_t>(hi - lo), s[k - 1]);
    for (auto j : pick) out.push_back(static_cast<std::size_t>(lo) + j);
  }
  return out;
}

}  // namespace detail

// Monte Carlo lower bound for kappa_j: even trials use random signs, odd trials Gaussian values
template <LinearMap DOp>
KappaEstimate kappa_localized(const DOp& D, const LevelPartition& N, const std::vector<std::size_t>& s, double p,
                              std::size_t trials, std::uint64_t seed, std::size_t threads = 0) {
  check_quasi_exponent(p);
  require(trials >= 1, ErrorKind::invalid_input, "trials must be >= 1");
  const std::size_t rows = D.rows();
  detail::check_sparsities(s, N, rows);
  const std::size_t r = N.r();
  std::vector<std::vector<VectorKappa>> per(trials, std::vector<VectorKappa>(r + 1));
  parallel_for(
      trials,
      [&](std::size_t t) {
        auto rng = make_rng(seed, {0x4a, t});
        auto supp = detail::random_level_support(s, N, rows, rng);
        if (supp.empty()) return;
        Vec x = Vec::Zero(static_cast<Eigen::Index>(rows));
        std::normal_distribution<double> nd;
        for (auto j : supp) x(j) = t % 2 == 0 ? (rng() & 1 ? 1.0 : -1.0) : nd(rng);
        Vec z = D.apply(D.apply_adjoint(x));
        for (std::size_t k = 1; k <= r; ++k) {
          auto [lo, hi] = N.span(k, rows);
          per[t][k - 1] = vector_kappa(z.segment(lo, hi - lo), p);
        }
        per[t][r] = vector_kappa(z, p);
      },
      threads);
  KappaEstimate e;
  e.p = p;
  e.trials = trials;
  e.seed = seed;
  e.truncated = N.truncated(rows);
  e.levels.assign(r, 0);
  e.levels_inf.assign(r, 0);
  e.levels_2.assign(r, 0);
  for (const auto& tr : per) {
    for (std::size_t k = 0; k < r; ++k) {
      e.levels_inf[k] = std::max(e.levels_inf[k], tr[k].k_inf);
      e.levels_2[k] = std::max(e.levels_2[k], tr[k].k_2);
    }
    e.global_inf = std::max(e.global_inf, tr[r].k_inf);
    e.global_2 = std::max(e.global_2, tr[r].k_2);
  }
  for (std::size_t k = 0; k < r; ++k) e.levels[k] = std::max(e.levels_inf[k], e.levels_2[k]);
  e.global = std::max(e.global_inf, e.global_2);
  std::size_t stot = std::accumulate(s.begin(), s.end(), std::size_t(0));
  if (p == 1.0 && stot > 0) e.eta = std::sqrt(e.global_2 / double(stot));
  return e;
}

// randomized kappa-tilde_j of the Figure-4 experiment for a fixed support Delta (global normalization)
struct KappaTilde {
  std::vector<double> kappa;
  std::vector<std::size_t> s;
  std::vector<std::size_t> level_sizes;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
};

template <LinearMap DOp>
KappaTilde kappa_tilde(const DOp& D, const IndexSet& Delta, const LevelPartition& N, std::size_t trials,
                       std::uint64_t seed, std::size_t threads = 0) {
  const std::size_t rows = D.rows();
  require(Delta.ambient() == rows, ErrorKind::dimension_mismatch, "support ambient differs from the frame rows");
  require(!Delta.empty(), ErrorKind::invalid_input, "empty support");
  require(trials >= 1, ErrorKind::invalid_input, "trials must be >= 1");
  const std::size_t r = N.r();
  KappaTilde out;
  out.trials = trials;
  out.seed = seed;
  out.s.assign(r, 0);
  for (auto j : Delta.indices()) ++out.s[N.level_of(j) - 1];
  for (std::size_t k = 1; k <= r; ++k) {
    auto [lo, hi] = N.span(k, rows);
    out.level_sizes.push_back(static_cast<std::size_t>(hi - lo));
  }
  std::vector<std::vector<double>> per(trials, std::vector<double>(r, 0.0));
  auto idx = Delta.zero_based();
  parallel_for(
      trials,
      [&](std::size_t t) {
        auto rng = make_rng(seed, {0x4b, t});
        std::normal_distribution<double> nd;
        Vec x = Vec::Zero(static_cast<Eigen::Index>(rows));
        for (auto j : idx) x(j) = t % 2 == 0 ? (rng() & 1 ? 1.0 : -1.0) : nd(rng);
        Vec z = D.apply(D.apply_adjoint(x));
        double zi = z.cwiseAbs().maxCoeff(), z2 = z.norm();
        if (zi == 0) return;
        for (std::size_t k = 1; k <= r; ++k) {
          auto [lo, hi] = N.span(k, rows);
          double l1 = z.segment(lo, hi - lo).cwiseAbs().sum();
          per[t][k - 1] = std::max(l1 / zi, (l1 / z2) * (l1 / z2));
        }
      },
      threads);
  out.kappa.assign(r, 0);
  for (const auto& tr : per)
    for (std::size_t k = 0; k < r; ++k) out.kappa[k] = std::max(out.kappa[k], tr[k]);
  return out;
}

// Pearson correlation of two profiles
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::invalid_input, "correlation needs two equal profiles");
  double n = double(a.size());
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

// ---- block norms omega(k,l) = ||P_Gamma_k V D* P_Lambda_l||

struct BlockNorms {
  RMat omega;
  RVec row_sums, col_sums;
  double C = 0;
  bool truncated = false;
};

inline BlockNorms block_norms(const Mat& U, const LevelPartition& M, const LevelPartition& N) {
  detail::check_block_levels(U, M, N);
  BlockNorms b;
  b.truncated = N.truncated(static_cast<std::size_t>(U.cols()));
  b.omega = RMat::Zero(M.r(), N.r());
  for (std::size_t k = 1; k <= M.r(); ++k) {
    Mat rows = detail::row_block(U, M, k);
    for (std::size_t l = 1; l <= N.r(); ++l) {
      auto [lo, hi] = detail::col_range(N, l, U);
      b.omega(k - 1, l - 1) = spectral_norm(Mat(rows.middleCols(lo, hi - lo)));
    }
  }
  b.row_sums = b.omega.rowwise().sum();
  b.col_sums = b.omega.colwise().sum().transpose();
  b.C = std::max(b.row_sums.maxCoeff(), b.col_sums.maxCoeff());
  return b;
}

inline BlockNorms block_norms(const Mat& V, const Mat& D, const LevelPartition& M, const LevelPartition& N) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  return block_norms(matmul(V, Mat(D.adjoint())), M, N);
}

// ---- relative sparsity: max ||P_Gamma_k V g||^2 over ||P_Lambda_l D g||^2 <= kappa_l

struct RelativeSparsity {
  std::vector<double> estimate;     // lower bounds (best feasible point found)
  std::vector<double> bound_lemma;  // C sum_l omega(k,l) kappa_l
  std::vector<double> bound_tight;  // (sum_l omega(k,l) sqrt(kappa_l))^2
  std::vector<char> converged;
  double C = 0;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;

  bool below_bounds(double rel = 1e-9) const {
    for (std::size_t k = 0; k < estimate.size(); ++k)
      if (estimate[k] > bound_tight[k] * (1 + rel) + rel || estimate[k] > bound_lemma[k] * (1 + rel) + rel)
        return false;
    return true;
  }
};

inline RelativeSparsity relative_sparsity(const Mat& V, const Mat& D, const LevelPartition& M, const LevelPartition& N,
                                          const std::vector<double>& kappa, std::size_t restarts = 8,
                                          std::uint64_t seed = 0, std::size_t max_iter = 2000) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  require(kappa.size() == N.r(), ErrorKind::invalid_input, "one kappa per sparsity level required");
  for (double k : kappa) require(k >= 0 && std::isfinite(k), ErrorKind::invalid_input, "kappa budgets must be >= 0");
  require(restarts >= 1, ErrorKind::invalid_input, "restarts must be >= 1");
  const std::size_t rowsD = static_cast<std::size_t>(D.rows());
  const Eigen::Index n = D.cols();
  BlockNorms bn = block_norms(V, D, M, N);

  RelativeSparsity out;
  out.C = bn.C;
  out.restarts = restarts;
  out.seed = seed;
  for (std::size_t k = 1; k <= M.r(); ++k) {
    double lem = 0, tight = 0;
    for (std::size_t l = 1; l <= N.r(); ++l) {
      lem += bn.omega(k - 1, l - 1) * kappa[l - 1];
      tight += bn.omega(k - 1, l - 1) * std::sqrt(kappa[l - 1]);
    }
    out.bound_lemma.push_back(bn.C * lem);
    out.bound_tight.push_back(tight * tight);
  }

  // zero budgets force P_Lambda_l D g = 0: restrict to the null space of those rows
  std::vector<Mat> B;
  std::vector<double> budget;
  Mat Z(0, n);
  for (std::size_t l = 1; l <= N.r(); ++l) {
    auto [lo, hi] = N.span(l, rowsD);
    Mat rows = D.middleRows(lo, hi - lo);
    if (kappa[l - 1] > 0) {
      B.push_back(rows);
      budget.push_back(kappa[l - 1]);
    } else {
      Mat Z2(Z.rows() + rows.rows(), n);
      Z2 << Z, rows;
      Z = std::move(Z2);
    }
  }
  Mat Pn = Mat::Identity(n, n);
  if (Z.rows() > 0 && Z.cwiseAbs().maxCoeff() > 0) {
    Mat Q = range_basis(Mat(Z.adjoint()));
    Pn -= matmul(Q, Mat(Q.adjoint()));
  }

  auto scale_to_boundary = [&](const Vec& g) -> std::optional<Vec> {
    double t = inf;
    for (std::size_t i = 0; i < B.size(); ++i) {
      double c = (B[i] * g).squaredNorm();
      if (c > 0) t = std::min(t, std::sqrt(budget[i] / c));
    }
    if (!std::isfinite(t)) return std::nullopt;
    return Vec(g * t);
  };

  for (std::size_t k = 1; k <= M.r(); ++k) {
    Mat A = detail::row_block(V, M, k);
    Mat AP = A * Pn;
    double best = 0;
    bool conv = true;
    if (B.empty() || AP.cwiseAbs().maxCoeff() == 0) {
      out.estimate.push_back(0);
      out.converged.push_back(1);
      continue;
    }
    for (std::size_t t = 0; t < restarts; ++t) {
      Vec g;
      if (t == 0) {
        Eigen::JacobiSVD<Mat> svd(AP, Eigen::ComputeThinV);
        g = Pn * svd.matrixV().col(0);
      } else {
        auto rng = make_rng(seed, {0x5a, k, t});
        g = Pn * gaussian_complex(rng, static_cast<std::size_t>(n));
      }
      auto g0 = scale_to_boundary(g);
      if (!g0) continue;
      g = *g0;
      double cur = (A * g).squaredNorm();
      double eta = 1.0;
      bool done = false;
      for (std::size_t it = 0; it < max_iter; ++it) {
        Vec h = Pn * (A.adjoint() * (A * g));
        double hn = h.norm();
        if (hn == 0) {
          done = true;
          break;
        }
        auto cand = scale_to_boundary(Vec(g + (eta * g.norm() / hn) * h));
        double val = cand ? (A * *cand).squaredNorm() : 0.0;
        if (cand && val > cur * (1 + 1e-13)) {
          g = *cand;
          cur = val;
          eta = std::min(eta * 2, 1e6);
        } else {
          eta *= 0.5;
          if (eta < 1e-9) {
            done = true;
            break;
          }
        }
      }
      conv = conv && done;
      best = std::max(best, cur);
    }
    out.estimate.push_back(best);
    out.converged.push_back(conv ? 1 : 0);
  }
  return out;
}

// ---- B-tilde(Delta) and B(s,N)

struct BTilde {
  double value = 0;
  double branch_perp = 0;  // ||D Q_W^perp D*||_inf
  double branch_par = 0;   // sqrt(||D Q_W D*||_inf * max_l sum_t ||P_l D Q_W D* P_t||_inf)
  std::size_t rank = 0;    // dim W
};

namespace detail {

template <class M>
class BTildeCore {
 public:
  using Scalar = typename M::Scalar;
  using Apply = std::function<M(const M&)>;

  BTildeCore(M D, LevelPartition N, double eig_tol, Apply apply)
      : D_(std::move(D)), N_(std::move(N)), tol_(eig_tol), apply_(std::move(apply)) {
    const Eigen::Index n = D_.cols();
    DDt_ = D_ * D_.adjoint();
    M I = M::Identity(n, n);
    parseval_ = (D_.adjoint() * D_ - I).cwiseAbs().maxCoeff() < 1e-9;
    if (parseval_ && D_.rows() == 2 * n) {
      M E(n, n), O(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        E.col(i) = D_.row(2 * i).adjoint() * std::sqrt(2.0);
        O.col(i) = D_.row(2 * i + 1).adjoint() * std::sqrt(2.0);
      }
      two_onb_ = (E.adjoint() * E - I).cwiseAbs().maxCoeff() < 1e-9 && (O.adjoint() * O - I).cwiseAbs().maxCoeff() < 1e-9;
      if (two_onb_) {
        E_ = std::move(E);
        O_ = std::move(O);
      }
    }
    for (std::size_t l = 1; l <= N_.r(); ++l) spans_.push_back(N_.span(l, static_cast<std::size_t>(D_.rows())));
    lev_.assign(static_cast<std::size_t>(D_.rows()), 0);
    for (std::size_t l = 0; l < spans_.size(); ++l)
      for (Eigen::Index i = spans_[l].first; i < spans_[l].second; ++i) lev_[static_cast<std::size_t>(i)] = l;
  }

  std::size_t rows() const { return static_cast<std::size_t>(D_.rows()); }

  BTilde eval(const IndexSet& Delta) const {
    require(Delta.ambient() == rows(), ErrorKind::dimension_mismatch, "support ambient differs from the frame rows");
    require(!Delta.empty(), ErrorKind::invalid_input, "B-tilde needs a nonempty support");
    auto [Bs, perp] = two_onb_ ? two_onb_basis(Delta) : gram_basis(Delta);
    const Eigen::Index R = D_.rows(), n = D_.cols();
    M Gx = M::Zero(R, R);
    if (Bs.cols() > 0) {
      M F = apply_ ? apply_(Bs) : M(D_ * Bs);
      Gx.template selfadjointView<Eigen::Lower>().rankUpdate(F);
    }
    BTilde out;
    out.rank = static_cast<std::size_t>(perp ? n - Bs.cols() : Bs.cols());
    // one pass over the lower triangle: row sums of |G|, |G_perp| and level sums of |G|
    const std::size_t r = spans_.size();
    RVec rs_par = RVec::Zero(R), rs_perp = RVec::Zero(R);
    RMat T = RMat::Zero(R, static_cast<Eigen::Index>(r));
    for (Eigen::Index j = 0; j < R; ++j) {
      const auto lj = static_cast<Eigen::Index>(lev_[j]);
      for (Eigen::Index i = j; i < R; ++i) {
        double x = std::abs(Gx(i, j)), y = std::abs(DDt_(i, j) - Gx(i, j));
        double gp = perp ? y : x, gq = perp ? x : y;
        rs_par(i) += gp;
        rs_perp(i) += gq;
        T(i, lj) += gp;
        if (i != j) {
          rs_par(j) += gp;
          rs_perp(j) += gq;
          T(j, static_cast<Eigen::Index>(lev_[i])) += gp;
        }
      }
    }
    out.branch_perp = rs_perp.maxCoeff();
    double ginf = rs_par.maxCoeff(), lv = 0;
    for (std::size_t l = 0; l < r; ++l) {
      auto [lo, hi] = spans_[l];
      if (hi <= lo) continue;
      lv = std::max(lv, T.middleRows(lo, hi - lo).colwise().maxCoeff().sum());
    }
    out.branch_par = std::sqrt(ginf * lv);
    out.value = std::max(out.branch_perp, out.branch_par);
    return out;
  }

 private:
  using Basis = std::pair<M, bool>;  // columns orthonormal; second = spans W^perp

  // eigenpairs of a Hermitian H with eigenvalue > lo
  static std::pair<RVec, M> eig_range(const M& H, double lo) {
    Eigen::SelfAdjointEigenSolver<M> es(H);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < H.rows(); ++i)
      if (es.eigenvalues()(i) > lo) keep.push_back(i);
    return {RVec(es.eigenvalues()(keep)), M(es.eigenvectors()(Eigen::all, keep))};
  }

  M pick_cols(const M& X, const std::vector<Eigen::Index>& c) const { return X(Eigen::all, c); }

  Basis gram_basis(const IndexSet& Delta) const {
    auto in = Delta.zero_based();
    auto out = Delta.complement().zero_based();
    if (!parseval_ || in.size() <= out.size()) {
      M Rw = D_(in, Eigen::all);
      M G = Rw * Rw.adjoint();
      Eigen::SelfAdjointEigenSolver<M> es(G);
      double lmax = es.eigenvalues().maxCoeff();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < G.rows(); ++i)
        if (es.eigenvalues()(i) > tol_ * lmax) keep.push_back(i);
      M U = es.eigenvectors()(Eigen::all, keep);
      M Bs = Rw.adjoint() * U;
      for (Eigen::Index c = 0; c < Bs.cols(); ++c) Bs.col(c) /= std::sqrt(es.eigenvalues()(keep[c]));
      return {Bs, false};
    }
    if (out.empty()) return {M(D_.cols(), 0), true};
    // W^perp = eigenvalue-1 space of D* P_{Delta^c} D
    M Rc = D_(out, Eigen::all);
    M G = Rc * Rc.adjoint();
    Eigen::SelfAdjointEigenSolver<M> es(G);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      if (es.eigenvalues()(i) >= 1 - tol_) keep.push_back(i);
    M U = es.eigenvectors()(Eigen::all, keep);
    M Bs = Rc.adjoint() * U;
    for (Eigen::Index c = 0; c < Bs.cols(); ++c) Bs.col(c) /= std::sqrt(es.eigenvalues()(keep[c]));
    return {Bs, true};
  }

  // W = A + B with A, B spanned by subsets of two orthonormal bases
  Basis two_onb_basis(const IndexSet& Delta) const {
    const Eigen::Index n = D_.cols();
    std::vector<char> ina(n, 0), inb(n, 0);
    for (auto j : Delta.indices()) ((j - 1) % 2 == 0 ? ina : inb)[(j - 1) / 2] = 1;
    std::vector<Eigen::Index> a, b, ac, bc;
    for (Eigen::Index i = 0; i < n; ++i) {
      (ina[i] ? a : ac).push_back(i);
      (inb[i] ? b : bc).push_back(i);
    }
    auto cube = [](double x) { return x * x * x; };
    double R2 = double(D_.rows()) * double(D_.rows());
    double dimw = double(std::min<std::size_t>(n, a.size() + b.size()));
    double cost_w = cube(double(std::min(a.size(), b.size()))) + R2 * dimw;
    double cost_p = cube(double(std::min(ac.size(), bc.size()))) + R2 * std::max(0.0, double(n) - dimw);
    if (cost_w <= cost_p) {
      bool a_big = a.size() >= b.size();
      M X = pick_cols(a_big ? E_ : O_, a_big ? a : b);
      M Y = pick_cols(a_big ? O_ : E_, a_big ? b : a);
      if (Y.cols() == 0) return {X, false};
      M C = X.adjoint() * Y;
      M Yres = Y - X * C;
      M H = M::Identity(Y.cols(), Y.cols()) - C.adjoint() * C;
      auto [w, U] = eig_range(H, tol_);
      M Bs(n, X.cols() + U.cols());
      Bs.leftCols(X.cols()) = X;
      Bs.rightCols(U.cols()) = Yres * U;
      for (Eigen::Index c = 0; c < U.cols(); ++c) Bs.col(X.cols() + c) /= std::sqrt(w(c));
      return {Bs, false};
    }
    bool a_small = ac.size() <= bc.size();
    M Xp = pick_cols(a_small ? E_ : O_, a_small ? ac : bc);
    M Yp = pick_cols(a_small ? O_ : E_, a_small ? bc : ac);
    if (Xp.cols() == 0 || Yp.cols() == 0) return {M(n, 0), true};
    M F = Yp.adjoint() * Xp;
    M H = F.adjoint() * F;
    auto [w, U] = eig_range(H, 1 - tol_);
    return {M(Xp * U), true};
  }

  M D_, DDt_, E_, O_;
  LevelPartition N_;
  double tol_;
  Apply apply_;
  bool parseval_ = false, two_onb_ = false;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans_;
  std::vector<std::size_t> lev_;
};

}  // namespace detail

// Reusable evaluator: precomputes DD* and detects the two-orthonormal-basis split of the redundant Haar frame.
// Rank cutoff: Gram eigenvalues below eig_tol (relative) count as zero.
class BTildeEvaluator {
 public:
  BTildeEvaluator(const Mat& D, const LevelPartition& N, double eig_tol = 1e-10) {
    require(D.size() > 0, ErrorKind::invalid_dimension, "empty analysis operator");
    if (is_real(D)) real_.emplace(RMat(D.real()), N, eig_tol, nullptr);
    else cplx_.emplace(D, N, eig_tol, nullptr);
  }
  // redundant Haar frame with matrix-free products
  static BTildeEvaluator haar_frame(int p, double eig_tol = 1e-10) {
    auto fast = std::make_shared<FastHaar>(p, true);
    return BTildeEvaluator(RMat(haar_frame_redundant(p).mat().real()), wavelet_levels(p, true), eig_tol,
                           [fast](const RMat& X) { return fast->apply_block(X); });
  }

  BTilde operator()(const IndexSet& Delta) const { return real_ ? real_->eval(Delta) : cplx_->eval(Delta); }
  std::size_t rows() const { return real_ ? real_->rows() : cplx_->rows(); }

 private:
  BTildeEvaluator(RMat D, const LevelPartition& N, double eig_tol, std::function<RMat(const RMat&)> apply) {
    real_.emplace(std::move(D), N, eig_tol, std::move(apply));
  }
  std::optional<detail::BTildeCore<RMat>> real_;
  std::optional<detail::BTildeCore<Mat>> cplx_;
};

inline BTilde b_tilde(const Mat& D, const LevelPartition& N, const IndexSet& Delta) {
  return BTildeEvaluator(D, N)(Delta);
}

struct BsN {
  double value = 0;
  IndexSet worst;
  std::size_t evaluated = 0;
  bool exhaustive = false;
  std::uint64_t seed = 0;
};

// max of B-tilde over (s,N)-sparse supports inside [N_r]: sampled, or every support when sum s <= 8
inline BsN b_sn(const BTildeEvaluator& ev, const LevelPartition& N, const std::vector<std::size_t>& s, std::size_t trials,
                std::uint64_t seed, bool exhaustive = false, std::size_t threads = 0) {
  const std::size_t rows = ev.rows();
  detail::check_sparsities(s, N, rows);
  std::size_t stot = std::accumulate(s.begin(), s.end(), std::size_t(0));
  require(stot >= 1, ErrorKind::invalid_input, "B(s,N) needs a nonzero sparsity");
  std::vector<IndexSet> supports;
  if (exhaustive) {
    require(stot <= 8, ErrorKind::invalid_input, "exhaustive B(s,N) needs s_1 + ... + s_r <= 8");
    std::vector<std::vector<std::vector<std::size_t>>> per_level;
    double count = 1;
    for (std::size_t k = 1; k <= N.r(); ++k) {
      auto [lo, hi] = N.span(k, rows);
      std::vector<std::vector<std::size_t>> combos;
      std::size_t m = static_cast<std::size_t>(hi - lo), c = s[k - 1];
      std::vector<std::size_t> pick(c);
      std::iota(pick.begin(), pick.end(), 0);
      for (;;) {
        std::vector<std::size_t> v;
        for (auto i : pick) v.push_back(static_cast<std::size_t>(lo) + i + 1);
        combos.push_back(v);
        std::size_t i = c;
        while (i > 0 && pick[i - 1] == m - c + i - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < c; ++j) pick[j] = pick[j - 1] + 1;
      }
      count *= double(combos.size());
      require(count <= 2e5, ErrorKind::invalid_input, "too many supports for exhaustive B(s,N)");
      per_level.push_back(std::move(combos));
    }
    std::vector<std::size_t> odo(N.r(), 0);
    for (;;) {
      std::vector<std::size_t> v;
      for (std::size_t k = 0; k < N.r(); ++k) v.insert(v.end(), per_level[k][odo[k]].begin(), per_level[k][odo[k]].end());
      supports.emplace_back(std::move(v), rows);
      std::size_t k = 0;
      while (k < N.r() && ++odo[k] == per_level[k].size()) odo[k++] = 0;
      if (k == N.r()) break;
    }
  } else {
    require(trials >= 1, ErrorKind::invalid_input, "trials must be >= 1");
    for (std::size_t t = 0; t < trials; ++t) {
      auto rng = make_rng(seed, {0xb5, t});
      auto supp = detail::random_level_support(s, N, rows, rng);
      for (auto& j : supp) ++j;
      supports.push_back(IndexSet::from_unsorted(std::move(supp), rows));
    }
  }
  std::vector<double> vals(supports.size());
  parallel_for(supports.size(), [&](std::size_t i) { vals[i] = ev(supports[i]).value; }, threads);
  BsN out;
  out.exhaustive = exhaustive;
  out.seed = seed;
  out.evaluated = vals.size();
  auto it = std::max_element(vals.begin(), vals.end());
  out.value = *it;
  out.worst = supports[static_cast<std::size_t>(it - vals.begin())];
  return out;
}

// ---- E(p): max B-tilde over supports of random piecewise-constant signals

struct ERow {
  int p = 0;
  double E = 0;
  double mean = 0;
  double min = 0;
  std::size_t trials = 0;
  std::size_t worst_trial = 0;
  std::size_t worst_support = 0;
};

inline ERow e_experiment_row(int p, std::size_t trials, std::uint64_t seed, std::size_t threads = 0) {
  require(trials >= 1, ErrorKind::invalid_input, "trials must be >= 1");
  require(p >= 2, ErrorKind::invalid_dimension, "E(p) needs p >= 2");
  auto ev = BTildeEvaluator::haar_frame(p);
  FastHaar D(p, true);
  const std::size_t n = std::size_t(1) << p;
  std::vector<double> vals(trials);
  std::vector<std::size_t> sizes(trials);
  parallel_for(
      trials,
      [&](std::size_t t) {
        auto rng = make_rng(seed, {0xe0, static_cast<std::uint64_t>(p), t});
        RVec x = random_piecewise_constant(n, n / 4, rng);
        auto Delta = analysis_support(D.apply(x.cast<cplx>()));
        sizes[t] = Delta.size();
        vals[t] = ev(Delta).value;
      },
      threads);
  ERow row;
  row.p = p;
  row.trials = trials;
  auto it = std::max_element(vals.begin(), vals.end());
  row.E = *it;
  row.worst_trial = static_cast<std::size_t>(it - vals.begin());
  row.worst_support = sizes[row.worst_trial];
  row.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / double(trials);
  row.min = *std::min_element(vals.begin(), vals.end());
  return row;
}

inline std::vector<ERow> e_experiment(int p_lo, int p_hi, std::size_t trials, std::uint64_t seed, std::size_t threads = 0) {
  require(p_lo <= p_hi, ErrorKind::invalid_input, "empty p range");
  std::vector<ERow> rows;
  for (int p = p_lo; p <= p_hi; ++p) rows.push_back(e_experiment_row(p, trials, seed, threads));
  return rows;
}

// ---- balancing property

struct BalancingReport {
  std::size_t M = 0, N = 0, s = 0;
  double K = 1, kappa1 = 0, kappa2 = 0;
  double lhs1 = 0, threshold1 = 0;  // worst ||D Q_W V* P_M^perp V Q_W D*||_2->2
  double lhs2 = 0, threshold2 = 0;  // worst ||D Q_W^perp V* P_M V Q_W D*||_2->inf
  std::size_t worst1 = 0, worst2 = 0;
  std::vector<double> lhs1_per, lhs2_per;
  bool pass1 = false, pass2 = false;
  bool pass() const { return pass1 && pass2; }
};

inline double balancing_threshold1(double kappa1, double kappa2, double K, std::size_t M) {
  double arg = std::log2(4.0 * std::sqrt(kappa2) * K * double(M));
  if (arg <= 0) return inf;
  return std::sqrt(kappa1 / kappa2) / 8.0 / std::sqrt(arg);
}

inline double balancing_threshold2(double kappa2) { return 1.0 / (8.0 * std::sqrt(kappa2)); }

inline std::vector<IndexSet> sample_supports(std::size_t N, std::size_t s, std::size_t trials, std::uint64_t seed) {
  require(s >= 1 && s <= N, ErrorKind::invalid_counts, "support size must lie in [1, N]");
  std::vector<IndexSet> out;
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = make_rng(seed, {0xba1, t});
    auto v = sample_without_replacement(rng, N, s);
    for (auto& j : v) ++j;
    out.emplace_back(std::move(v), N);
  }
  return out;
}

namespace detail {

// per-support pieces shared by a fixed-M evaluation and the M sweep
struct BalancingPiece {
  Mat U;   // orthonormal basis of W = R(D* P_Delta)
  Mat VU;  // V U
};

inline BalancingPiece balancing_piece(const Mat& V, const Mat& D, const IndexSet& Delta) {
  require(Delta.size() >= 1, ErrorKind::invalid_input, "empty support");
  for (auto j : Delta.indices())
    require(j <= static_cast<std::size_t>(D.rows()), ErrorKind::invalid_index, "support outside the frame rows");
  Mat rows = D(Delta.zero_based(), Eigen::all);
  BalancingPiece b;
  b.U = range_basis(Mat(rows.adjoint()));
  b.VU = matmul(V, b.U);
  return b;
}

// lhs1 = ||P_M^perp V U||^2, lhs2 = max row norm of D (I - U U*) V_M* V_M U
inline std::pair<double, double> balancing_lhs(const Mat& V, const Mat& D, const BalancingPiece& b, std::size_t M) {
  const Eigen::Index Mi = static_cast<Eigen::Index>(M);
  double l1 = 0;
  if (Mi < V.rows()) {
    double s = spectral_norm(Mat(b.VU.bottomRows(V.rows() - Mi)));
    l1 = s * s;
  }
  Mat S = adjoint_mul(Mat(V.topRows(Mi)), Mat(b.VU.topRows(Mi)));
  Mat P = S - matmul(b.U, adjoint_mul(b.U, S));
  double l2 = matmul(D, P).rowwise().norm().maxCoeff();
  return {l1, l2};
}

}  // namespace detail

inline BalancingReport balancing_residuals(const Mat& V, const Mat& D, std::size_t M, std::size_t N, std::size_t s,
                                           double kappa1, double kappa2, double K, const std::vector<IndexSet>& deltas,
                                           std::size_t threads = 0) {
  require(kappa1 > 0 && kappa2 >= kappa1, ErrorKind::invalid_input, "need kappa2 >= kappa1 > 0");
  require(K >= 1, ErrorKind::invalid_input, "K must be >= 1");
  require(M >= 1 && M <= static_cast<std::size_t>(V.rows()), ErrorKind::invalid_input, "M must lie in [1, rows(V)]");
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  require(!deltas.empty(), ErrorKind::invalid_input, "no supports to test");
  BalancingReport rep;
  rep.M = M;
  rep.N = N;
  rep.s = s;
  rep.K = K;
  rep.kappa1 = kappa1;
  rep.kappa2 = kappa2;
  rep.threshold1 = balancing_threshold1(kappa1, kappa2, K, M);
  rep.threshold2 = balancing_threshold2(kappa2);
  rep.lhs1_per.resize(deltas.size());
  rep.lhs2_per.resize(deltas.size());
  parallel_for(
      deltas.size(),
      [&](std::size_t i) {
        auto piece = detail::balancing_piece(V, D, deltas[i]);
        auto [a, b] = detail::balancing_lhs(V, D, piece, M);
        rep.lhs1_per[i] = a;
        rep.lhs2_per[i] = b;
      },
      threads);
  auto i1 = std::max_element(rep.lhs1_per.begin(), rep.lhs1_per.end());
  auto i2 = std::max_element(rep.lhs2_per.begin(), rep.lhs2_per.end());
  rep.lhs1 = *i1;
  rep.lhs2 = *i2;
  rep.worst1 = static_cast<std::size_t>(i1 - rep.lhs1_per.begin());
  rep.worst2 = static_cast<std::size_t>(i2 - rep.lhs2_per.begin());
  rep.pass1 = rep.lhs1 <= rep.threshold1;
  rep.pass2 = rep.lhs2 <= rep.threshold2;
  return rep;
}

// smallest M in [1, rows(V)] for which both balancing conditions hold on every support
inline std::optional<std::size_t> minimal_balancing_M(const Mat& V, const Mat& D, double kappa1, double kappa2, double K,
                                                      const std::vector<IndexSet>& deltas) {
  require(kappa1 > 0 && kappa2 >= kappa1, ErrorKind::invalid_input, "need kappa2 >= kappa1 > 0");
  std::vector<detail::BalancingPiece> pieces;
  for (const auto& d : deltas) pieces.push_back(detail::balancing_piece(V, D, d));
  double t2 = balancing_threshold2(kappa2);
  for (std::size_t M = 1; M <= static_cast<std::size_t>(V.rows()); ++M) {
    double t1 = balancing_threshold1(kappa1, kappa2, K, M);
    bool ok = true;
    for (const auto& p : pieces) {
      auto [a, b] = detail::balancing_lhs(V, D, p, M);
      if (a > t1 || b > t2) {
        ok = false;
        break;
      }
    }
    if (ok) return M;
  }
  return std::nullopt;
}

// ---- M-tilde

struct TildeM {
  std::optional<std::size_t> index;  // smallest i with both tail bounds for all j >= i
  std::optional<double> value;       // ||DD*||_inf * index
  double dd_norm = 0;
  std::vector<double> tail1, tail2;  // per column ||P_M V D* e_j||, ||Q D* e_j||
  double threshold1 = 0, threshold2 = 0;
};

inline TildeM tilde_m(const Mat& V, const Mat& D, std::size_t M, std::size_t N, double kappa_max, double q) {
  require(q > 0 && q <= 1, ErrorKind::invalid_input, "q must lie in (0, 1]");
  require(kappa_max > 0, ErrorKind::invalid_input, "kappa_max must be positive");
  require(M >= 1 && M <= static_cast<std::size_t>(V.rows()), ErrorKind::invalid_input, "M must lie in [1, rows(V)]");
  require(N >= 1 && N <= static_cast<std::size_t>(D.rows()), ErrorKind::invalid_input, "N must lie in [1, rows(D)]");
  TildeM t;
  Mat DDt = matmul(D, Mat(D.adjoint()));
  t.dd_norm = op_norm(DDt, Norm::inf, Norm::inf);
  t.threshold1 = q / (8.0 * std::sqrt(kappa_max));
  t.threshold2 = std::sqrt(5.0 * q) / 4.0;
  Mat U = matmul(Mat(V.topRows(static_cast<Eigen::Index>(M))), Mat(D.adjoint()));
  Mat B = range_basis(Mat(D.topRows(static_cast<Eigen::Index>(N)).adjoint()));
  Mat C = adjoint_mul(B, Mat(D.adjoint()));
  const std::size_t cols = static_cast<std::size_t>(D.rows());
  for (std::size_t j = 0; j < cols; ++j) {
    t.tail1.push_back(U.col(j).norm());
    t.tail2.push_back(C.col(j).norm());
  }
  std::size_t i = cols + 1;
  while (i > 1 && t.tail1[i - 2] <= t.threshold1 && t.tail2[i - 2] <= t.threshold2) --i;
  if (i <= cols) {
    t.index = i;
    t.value = t.dd_norm * double(i);
  }
  return t;
}

// ---- Theorem conditions

struct TheoremInputs {
  std::vector<std::size_t> s;
  double p = 1;
  double epsilon = 0.1;
  double C_user = 1;
  std::size_t kappa_trials = 200;
  std::size_t b_trials = 50;
  std::size_t balancing_trials = 20;
  std::uint64_t seed = 0;
};

struct TheoremRow {
  std::size_t k = 0;
  std::size_t stratum = 0, m = 0;
  double lhs_ii = 0;          // C sqrt(r) log(1/eps) log(M~ sqrt(kmax)/q) B (S_k/m_k) sum_l mu^2 kappa_l
  double slack_ii = 0;        // 1 - lhs
  std::size_t m_hat = 0;      // equal-share solution of the m-hat system
  double m_required = 0;      // C r m_hat B^2 log(1/eps) log(...)
  double slack_m = 0;         // m_k - m_required
  double m_corollary = 0;     // recommended count, capped at the stratum
};

struct TheoremReport {
  std::vector<TheoremRow> rows;
  KappaEstimate kappa;
  RelativeSparsity kappa_hat;
  BlockNorms omega;
  LocalCoherenceMatrix mu;
  double B = 0;
  TildeM mtilde;
  double mtilde_used = 0;
  bool mtilde_fallback = false;  // no index: the full column count was used
  double q = 1, log_term = 0;
  double L = 0;
  std::vector<double> m_hat_system;  // per l: C sum_k (S_k/m_hat_k - 1) mu^2 kappa_hat_k, must be <= 1
  BalancingReport balancing;
  bool condition_i = false, condition_ii = false;
  bool probability_one = false;
};

inline TheoremReport check_theorem_conditions(const Mat& V, const Mat& D, const LevelPartition& Mlev,
                                              const std::vector<std::size_t>& m, const LevelPartition& Nlev,
                                              const TheoremInputs& in) {
  require(in.epsilon > 0 && in.epsilon <= std::exp(-1.0), ErrorKind::invalid_input, "epsilon must lie in (0, 1/e]");
  require(in.C_user > 0, ErrorKind::invalid_input, "C_user must be positive");
  require(m.size() == Mlev.r(), ErrorKind::invalid_counts, "one sample count per level required");
  require(Mlev.r() == Nlev.r(), ErrorKind::invalid_input, "sampling and sparsity levels must have the same count");
  const std::size_t r = Mlev.r();
  TheoremReport rep;
  DenseOperator Dop(D);
  rep.kappa = kappa_localized(Dop, Nlev, in.s, in.p, in.kappa_trials, derive_seed(in.seed, {1}));
  require(*std::max_element(rep.kappa.levels.begin(), rep.kappa.levels.end()) > 0, ErrorKind::invalid_input,
          "all localized sparsities vanish");
  rep.omega = block_norms(V, D, Mlev, Nlev);
  rep.mu = local_coherence(V, D, Mlev, Nlev);
  rep.kappa_hat = relative_sparsity(V, D, Mlev, Nlev, rep.kappa.levels, 4, derive_seed(in.seed, {2}));
  BTildeEvaluator ev(D, Nlev);
  rep.B = b_sn(ev, Nlev, in.s, in.b_trials, derive_seed(in.seed, {3})).value;

  rep.q = 1;
  for (std::size_t k = 1; k <= r; ++k) {
    require(m[k - 1] >= 1 && m[k - 1] <= Mlev.size(k), ErrorKind::invalid_counts, "m_k must lie in [1, stratum size]");
    rep.q = std::min(rep.q, double(m[k - 1]) / double(Mlev.size(k)));
  }
  double kmax = rep.kappa.kappa_max(), kmin = std::max(rep.kappa.kappa_min(), 1e-300);
  std::size_t Ntot = std::min<std::size_t>(Nlev.total(), static_cast<std::size_t>(D.rows()));
  rep.mtilde = tilde_m(V, D, Mlev.total(), Ntot, kmax, rep.q);
  if (rep.mtilde.value) {
    rep.mtilde_used = *rep.mtilde.value;
  } else {
    rep.mtilde_fallback = true;
    rep.mtilde_used = rep.mtilde.dd_norm * double(D.rows());
  }
  const double le = std::log(1.0 / in.epsilon);
  rep.log_term = std::log(rep.mtilde_used * std::sqrt(kmax) / rep.q);
  rep.L = 1 + std::sqrt(std::log2(6.0 / in.epsilon)) / std::log2(4.0 / rep.q * double(Mlev.total()) * std::sqrt(kmax));
  rep.probability_one = true;
  for (std::size_t k = 1; k <= r; ++k) rep.probability_one = rep.probability_one && m[k - 1] == Mlev.size(k);

  const double C = in.C_user, sr = std::sqrt(double(r));
  std::vector<double> a(r, 0);
  for (std::size_t k = 1; k <= r; ++k)
    for (std::size_t l = 1; l <= r; ++l) {
      double mu2 = rep.mu.mu(k - 1, l - 1) * rep.mu.mu(k - 1, l - 1);
      a[k - 1] = std::max(a[k - 1], mu2 * rep.kappa_hat.estimate[k - 1]);
    }
  rep.condition_ii = true;
  for (std::size_t k = 1; k <= r; ++k) {
    TheoremRow row;
    row.k = k;
    row.stratum = Mlev.size(k);
    row.m = m[k - 1];
    double S = double(row.stratum);
    double mu_k = 0, om_k = 0;
    for (std::size_t l = 1; l <= r; ++l) {
      mu_k += rep.mu.mu(k - 1, l - 1) * rep.mu.mu(k - 1, l - 1) * rep.kappa.levels[l - 1];
      om_k += rep.omega.omega(k - 1, l - 1) * rep.kappa.levels[l - 1];
    }
    row.lhs_ii = C * sr * le * rep.log_term * rep.B * (S / double(row.m)) * mu_k;
    row.slack_ii = 1 - row.lhs_ii;
    // each level takes a 1/r share of the m-hat system
    double mh = a[k - 1] > 0 ? S / (1 + 1 / (double(r) * C * a[k - 1])) : 1.0;
    row.m_hat = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mh - 1e-12)));
    row.m_required = C * double(r) * double(row.m_hat) * rep.B * rep.B * le * rep.log_term;
    row.slack_m = double(row.m) - row.m_required;
    double prev = double(Mlev.lower(k));
    row.m_corollary = prev > 0 ? std::min(S, C * double(r) * rep.omega.C * rep.omega.C * rep.B * rep.B * le *
                                                 rep.log_term * (S / prev) * om_k)
                               : S;
    if (!rep.probability_one && (row.slack_ii < 0 || row.slack_m < 0)) rep.condition_ii = false;
    rep.rows.push_back(row);
  }
  for (std::size_t l = 1; l <= r; ++l) {
    double v = 0;
    for (std::size_t k = 1; k <= r; ++k) {
      double mu2 = rep.mu.mu(k - 1, l - 1) * rep.mu.mu(k - 1, l - 1);
      v += (double(Mlev.size(k)) / double(rep.rows[k - 1].m_hat) - 1) * mu2 * rep.kappa_hat.estimate[k - 1];
    }
    rep.m_hat_system.push_back(C * v);
    if (!rep.probability_one && C * v > 1 + 1e-12) rep.condition_ii = false;
  }
  std::size_t stot = std::accumulate(in.s.begin(), in.s.end(), std::size_t(0));
  auto deltas = sample_supports(Ntot, std::max<std::size_t>(1, std::min(stot, Ntot)), in.balancing_trials,
                                derive_seed(in.seed, {4}));
  rep.balancing = balancing_residuals(V, D, Mlev.total(), Ntot, stot, kmin, std::max(kmax, kmin), 1.0 / rep.q, deltas);
  rep.condition_i = rep.balancing.pass();
  return rep;
}

// ---- intrinsic localization

struct IntrinsicLocalization {
  double p = 1;
  std::size_t s = 0;
  std::vector<std::size_t> s_levels;
  double I_all = 0;  // I_p(Delta, all)
  RMat I;            // I(m, n) = I_p(Delta_m, Lambda_n)
  double pinv_norm = 0;        // ||(P_Delta D)^+||
  double gram_pinv_inf = 0;    // ||(P_Delta D D* P_Delta)^+||_inf
  bool rank_deficient = false;
  double bound_i = 0, bound_ii = 0;
  std::vector<double> bound_iii, bound_iv;
  // Monte Carlo worst observed value / bound
  double ratio_i = 0, ratio_ii = 0, ratio_iii = 0, ratio_iv = 0;
  std::size_t samples = 0;
  bool holds(double ratio, double slack = 1e-9) const { return ratio <= 1 + slack; }
};

inline IntrinsicLocalization intrinsic_localization(const Mat& D, const IndexSet& Delta, const LevelPartition& N, double p,
                                                    std::size_t samples = 500, std::uint64_t seed = 0) {
  require(p > 0 && p <= 1, ErrorKind::invalid_input, "p must lie in (0, 1]");
  const std::size_t rows = static_cast<std::size_t>(D.rows());
  require(Delta.ambient() == rows && !Delta.empty(), ErrorKind::invalid_input, "support must be a nonempty subset of the frame rows");
  const std::size_t r = N.r();
  IntrinsicLocalization out;
  out.p = p;
  out.s = Delta.size();
  out.samples = samples;
  out.s_levels.assign(r, 0);
  for (auto j : Delta.indices()) ++out.s_levels[N.level_of(j) - 1];
  RMat A = matmul(D, Mat(D.adjoint())).cwiseAbs();
  // roundoff in exact zeros of the Gram would survive the p-th power
  const double gcut = 1e-12 * A.maxCoeff();
  A = (A.array() <= gcut).select(0.0, A);
  RMat Ap = p == 1.0 ? A : RMat(A.array().pow(p));
  out.I = RMat::Zero(r, r);
  for (auto j : Delta.indices()) {
    Eigen::Index c = static_cast<Eigen::Index>(j - 1);
    out.I_all = std::max(out.I_all, Ap.col(c).sum());
    std::size_t mlev = N.level_of(j);
    for (std::size_t n = 1; n <= r; ++n) {
      auto [lo, hi] = N.span(n, rows);
      out.I(mlev - 1, n - 1) = std::max(out.I(mlev - 1, n - 1), Ap.col(c).segment(lo, hi - lo).sum());
    }
  }
  auto idx = Delta.zero_based();
  Mat PD = D(idx, Eigen::all);
  out.pinv_norm = pseudo_inverse_norm(PD);
  out.rank_deficient = PD.rows() > PD.cols() || min_singular_value(PD) <= 1e-10 * spectral_norm(PD);
  Mat G = matmul(PD, Mat(PD.adjoint()));
  out.gram_pinv_inf = op_norm(pseudo_inverse(G), Norm::inf, Norm::inf);
  double s = double(out.s), Bp = std::pow(out.pinv_norm, p), Gp = std::pow(out.gram_pinv_inf, p);
  out.bound_i = Bp * out.I_all * std::pow(s, 1 - p / 2);
  out.bound_ii = Bp * out.I_all * s;
  for (std::size_t n = 1; n <= r; ++n) {
    double b3 = 0, b4 = 0;
    for (std::size_t mm = 1; mm <= r; ++mm) {
      double sm = double(out.s_levels[mm - 1]);
      if (sm == 0) continue;
      b3 += out.I(mm - 1, n - 1) * std::pow(sm, 1 - p / 2);
      b4 += out.I(mm - 1, n - 1) * sm;
    }
    out.bound_iii.push_back(Bp * b3);
    out.bound_iv.push_back(Gp * b4);
  }
  for (std::size_t t = 0; t < samples; ++t) {
    auto rng = make_rng(seed, {0x1c, t});
    Vec x = Vec::Zero(static_cast<Eigen::Index>(rows));
    std::normal_distribution<double> nd;
    for (auto j : idx) x(j) = t % 2 == 0 ? (rng() & 1 ? 1.0 : -1.0) : nd(rng);
    Vec z = D * (D.adjoint() * x);
    double z2 = z.norm(), zi = z.cwiseAbs().maxCoeff();
    if (zi == 0) continue;
    Vec a2 = z / z2, ai = z / zi;
    auto ratio = [](double v, double b) { return b > 0 ? v / b : (v > 0 ? inf : 0.0); };
    out.ratio_i = std::max(out.ratio_i, ratio(lp_mass(a2, p), out.bound_i));
    out.ratio_ii = std::max(out.ratio_ii, ratio(lp_mass(ai, p), out.bound_ii));
    for (std::size_t n = 1; n <= r; ++n) {
      auto [lo, hi] = N.span(n, rows);
      out.ratio_iii = std::max(out.ratio_iii, ratio(lp_mass(a2.segment(lo, hi - lo), p), out.bound_iii[n - 1]));
      out.ratio_iv = std::max(out.ratio_iv, ratio(lp_mass(ai.segment(lo, hi - lo), p), out.bound_iv[n - 1]));
    }
  }
  return out;
}

// number of nonzero frame coefficients of DD*x compared with s log2 N (redundancy-induced fill-in)
struct SparsityInflation {
  std::size_t s = 0, nnz = 0;
  double s_log_n = 0;
};

template <LinearMap DOp>
SparsityInflation sparsity_inflation(const DOp& D, const Vec& x, double rel_tol = 1e-10) {
  SparsityInflation out;
  out.s = analysis_support_size(x, rel_tol);
  out.nnz = analysis_support_size(D.apply(D.apply_adjoint(x)), rel_tol);
  out.s_log_n = double(out.s) * std::log2(double(D.cols()));
  return out;
}

}  // namespace framecs
