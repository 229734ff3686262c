#pragma once

// dense two-phase simplex (Bland's rule), test-only reference oracle
#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace oracle {

struct LpResult {
  bool feasible = false;
  bool bounded = true;
  double value = 0;
  Eigen::VectorXd x;
};

namespace detail {

inline void pivot(Eigen::MatrixXd& T, std::vector<int>& basis, int r, int c) {
  T.row(r) /= T(r, c);
  for (int i = 0; i < T.rows(); ++i)
    if (i != r && T(i, c) != 0.0) T.row(i) -= T(i, c) * T.row(r);
  basis[r] = c;
}

// last row holds reduced costs, last column the rhs; columns >= ncols_allowed never enter
inline bool run(Eigen::MatrixXd& T, std::vector<int>& basis, int ncols_allowed, double eps) {
  const int m = static_cast<int>(T.rows()) - 1;
  const int rhs = static_cast<int>(T.cols()) - 1;
  for (int guard = 0; guard < 100000; ++guard) {
    int enter = -1;
    for (int j = 0; j < ncols_allowed; ++j)
      if (T(m, j) < -eps) {
        enter = j;
        break;
      }
    if (enter < 0) return true;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) > eps) {
        double ratio = T(i, rhs) / T(i, enter);
        if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && leave >= 0 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;
    pivot(T, basis, leave, enter);
  }
  return false;
}

}  // namespace detail

// minimize c^T x subject to A x = b, x >= 0
inline LpResult simplex(Eigen::MatrixXd A, Eigen::VectorXd b, const Eigen::VectorXd& c, double eps = 1e-10) {
  const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols());
  for (int i = 0; i < m; ++i)
    if (b(i) < 0) {
      A.row(i) *= -1;
      b(i) *= -1;
    }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  T.topLeftCorner(m, n) = A;
  T.block(0, n, m, m).setIdentity();
  T.topRightCorner(m, 1) = b;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  // phase 1: minimise the artificial sum
  for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);
  for (int i = 0; i < m; ++i) T(m, n + i) = 0;
  detail::run(T, basis, n + m, eps);
  LpResult res;
  if (-T(m, n + m) > 1e-8) return res;
  res.feasible = true;
  // drive artificials out of the basis
  std::vector<char> keep(m, 1);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    int c2 = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(T(i, j)) > 1e-9) {
        c2 = j;
        break;
      }
    if (c2 >= 0) detail::pivot(T, basis, i, c2);
    else keep[i] = 0;
  }
  // phase 2 tableau without artificial columns and redundant rows
  std::vector<int> rows;
  for (int i = 0; i < m; ++i)
    if (keep[i]) rows.push_back(i);
  const int m2 = static_cast<int>(rows.size());
  Eigen::MatrixXd T2 = Eigen::MatrixXd::Zero(m2 + 1, n + 1);
  std::vector<int> basis2(m2);
  for (int k = 0; k < m2; ++k) {
    T2.row(k).head(n) = T.row(rows[k]).head(n);
    T2(k, n) = T(rows[k], n + m);
    basis2[k] = basis[rows[k]];
  }
  T2.row(m2).head(n) = c.transpose();
  for (int k = 0; k < m2; ++k) T2.row(m2) -= c(basis2[k]) * T2.row(k);
  if (!detail::run(T2, basis2, n, eps)) {
    res.bounded = false;
    return res;
  }
  res.x = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < m2; ++k) res.x(basis2[k]) = T2(k, n);
  res.value = c.dot(res.x);
  return res;
}

// min ||D g||_1 s.t. A g = b (real data): variables [g+, g-, u, w] >= 0 with Dg = u - w
inline LpResult analysis_l1(const Eigen::MatrixXd& D, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int p = static_cast<int>(D.rows()), n = static_cast<int>(D.cols()), m = static_cast<int>(A.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p + m, 2 * n + 2 * p);
  M.block(0, 0, p, n) = D;
  M.block(0, n, p, n) = -D;
  M.block(0, 2 * n, p, p) = -Eigen::MatrixXd::Identity(p, p);
  M.block(0, 2 * n + p, p, p) = Eigen::MatrixXd::Identity(p, p);
  M.block(p, 0, m, n) = A;
  M.block(p, n, m, n) = -A;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p + m);
  rhs.tail(m) = b;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * n + 2 * p);
  c.tail(2 * p).setOnes();
  auto r = simplex(M, rhs, c);
  if (r.feasible && r.bounded) r.x = Eigen::VectorXd(r.x.head(n) - r.x.segment(n, n));
  return r;
}

}  // namespace oracle
