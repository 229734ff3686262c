#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "framecs/errors.hpp"

namespace framecs {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double inf = std::numeric_limits<double>::infinity();

// finite complex vector, length >= 1
class Signal {
 public:
  Signal() = default;
  explicit Signal(Vec v) : v_(std::move(v)) { validate(); }
  Signal(std::initializer_list<cplx> xs) : v_(static_cast<Eigen::Index>(xs.size())) {
    Eigen::Index i = 0;
    for (auto x : xs) v_(i++) = x;
    validate();
  }
  static Signal zeros(std::size_t n) { return Signal(Vec::Zero(static_cast<Eigen::Index>(n))); }
  static Signal from_real(const RVec& x) { return Signal(x.cast<cplx>()); }

  std::size_t size() const { return static_cast<std::size_t>(v_.size()); }
  bool empty() const { return v_.size() == 0; }
  const Vec& vec() const { return v_; }
  // 1-based
  cplx at(std::size_t j) const {
    require(j >= 1 && j <= size(), ErrorKind::invalid_index, "signal index " + std::to_string(j));
    return v_(static_cast<Eigen::Index>(j - 1));
  }

 private:
  void validate() const {
    require(v_.size() >= 1, ErrorKind::invalid_dimension, "signal must have length >= 1");
    require(v_.allFinite(), ErrorKind::invalid_input, "signal has non-finite entries");
  }
  Vec v_;
};

class DenseOperator {
 public:
  DenseOperator() = default;
  explicit DenseOperator(Mat m) : m_(std::move(m)) {
    require(m_.rows() > 0 && m_.cols() > 0, ErrorKind::invalid_dimension, "operator must be non-empty");
    require(m_.allFinite(), ErrorKind::invalid_input, "operator has non-finite entries");
  }
  static DenseOperator identity(std::size_t n) {
    return DenseOperator(Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  }

  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
  const Mat& mat() const { return m_; }

  Vec apply(const Vec& x) const {
    require(x.size() == m_.cols(), ErrorKind::dimension_mismatch, "apply: input length");
    return m_ * x;
  }
  Vec apply_adjoint(const Vec& y) const {
    require(y.size() == m_.rows(), ErrorKind::dimension_mismatch, "apply_adjoint: input length");
    return m_.adjoint() * y;
  }
  Signal apply(const Signal& x) const { return Signal(apply(x.vec())); }
  DenseOperator adjoint() const { return DenseOperator(Mat(m_.adjoint())); }

 private:
  Mat m_;
};

// sorted unique 1-based indices inside [1, ambient]
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<std::size_t> idx, std::size_t ambient) : idx_(std::move(idx)), ambient_(ambient) {
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      require(idx_[i] >= 1 && idx_[i] <= ambient_, ErrorKind::invalid_index,
              "index " + std::to_string(idx_[i]) + " outside [1," + std::to_string(ambient_) + "]");
      require(i == 0 || idx_[i] > idx_[i - 1], ErrorKind::invalid_index, "indices must be strictly increasing");
    }
  }
  static IndexSet from_unsorted(std::vector<std::size_t> idx, std::size_t ambient) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return IndexSet(std::move(idx), ambient);
  }
  static IndexSet all(std::size_t n) { return range(1, n, n); }
  // inclusive 1-based range; empty when last < first
  static IndexSet range(std::size_t first, std::size_t last, std::size_t ambient) {
    std::vector<std::size_t> v;
    for (std::size_t i = first; i <= last; ++i) v.push_back(i);
    return IndexSet(std::move(v), ambient);
  }

  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  std::size_t ambient() const { return ambient_; }
  const std::vector<std::size_t>& indices() const { return idx_; }
  bool contains(std::size_t j) const { return std::binary_search(idx_.begin(), idx_.end(), j); }

  std::vector<Eigen::Index> zero_based() const {
    std::vector<Eigen::Index> out(idx_.size());
    for (std::size_t i = 0; i < idx_.size(); ++i) out[i] = static_cast<Eigen::Index>(idx_[i] - 1);
    return out;
  }
  std::vector<char> mask() const {
    std::vector<char> m(ambient_, 0);
    for (auto j : idx_) m[j - 1] = 1;
    return m;
  }
  IndexSet complement() const {
    std::vector<std::size_t> v;
    std::size_t k = 0;
    for (std::size_t j = 1; j <= ambient_; ++j) {
      if (k < idx_.size() && idx_[k] == j) {
        ++k;
        continue;
      }
      v.push_back(j);
    }
    return IndexSet(std::move(v), ambient_);
  }
  IndexSet unite(const IndexSet& o) const {
    require(o.ambient_ == ambient_, ErrorKind::dimension_mismatch, "index set ambient mismatch");
    std::vector<std::size_t> v;
    std::set_union(idx_.begin(), idx_.end(), o.idx_.begin(), o.idx_.end(), std::back_inserter(v));
    return IndexSet(std::move(v), ambient_);
  }
  bool operator==(const IndexSet& o) const { return ambient_ == o.ambient_ && idx_ == o.idx_; }

 private:
  std::vector<std::size_t> idx_;
  std::size_t ambient_ = 0;
};

// ---- helpers on raw Eigen objects

inline bool is_real(const Mat& A, double tol = 0.0) { return A.imag().cwiseAbs().maxCoeff() <= tol; }

// real gemm when both factors are real; complex otherwise
inline Mat matmul(const Mat& A, const Mat& B) {
  if (A.size() > 0 && B.size() > 0 && is_real(A) && is_real(B)) {
    RMat C = A.real() * B.real();
    return C.cast<cplx>();
  }
  return A * B;
}

inline Mat adjoint_mul(const Mat& A, const Mat& B) {
  if (A.size() > 0 && B.size() > 0 && is_real(A) && is_real(B)) {
    RMat C = A.real().transpose() * B.real();
    return C.cast<cplx>();
  }
  return A.adjoint() * B;
}

template <class Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& x, double p) {
  require(x.size() >= 1, ErrorKind::invalid_input, "lp_norm of empty vector");
  require(p > 0, ErrorKind::invalid_input, "lp_norm exponent must be positive");
  require(x.allFinite(), ErrorKind::invalid_input, "lp_norm of non-finite vector");
  if (std::isinf(p)) return x.cwiseAbs().maxCoeff();
  if (p == 2.0) return x.norm();
  if (p == 1.0) return x.cwiseAbs().sum();
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x(i)), p);
  return std::pow(s, 1.0 / p);
}

inline double lp_norm(const Signal& x, double p) {
  require(!x.empty(), ErrorKind::invalid_input, "lp_norm of empty signal");
  return lp_norm(x.vec(), p);
}

// sum |x_j|^p, the p-th power of the quasi-norm without the root
template <class Derived>
double lp_mass(const Eigen::MatrixBase<Derived>& x, double p) {
  if (p == 1.0) return x.cwiseAbs().sum();
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double a = std::abs(x(i));
    if (a > 0) s += std::pow(a, p);
  }
  return s;
}

enum class Norm { one, two, inf };

inline const char* to_string(Norm n) {
  switch (n) {
    case Norm::one: return "1";
    case Norm::two: return "2";
    case Norm::inf: return "inf";
  }
  return "?";
}

namespace detail {

template <class M>
double hermitian_abs_max_eig(const M& H) {
  Eigen::SelfAdjointEigenSolver<M> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <class M>
double spectral_norm_impl(const M& A) {
  if (A.rows() == A.cols() && (A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + A.cwiseAbs().maxCoeff())) {
    M H = (A + A.adjoint()) * 0.5;
    return hermitian_abs_max_eig(H);
  }
  if (std::min(A.rows(), A.cols()) <= 64) {
    Eigen::JacobiSVD<M> svd(A);
    return svd.singularValues()(0);
  }
  M G = A.rows() >= A.cols() ? M(A.adjoint() * A) : M(A * A.adjoint());
  return std::sqrt(std::max(0.0, hermitian_abs_max_eig(G)));
}

}  // namespace detail

inline double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  if (A.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  if (is_real(A)) return detail::spectral_norm_impl<RMat>(A.real());
  return detail::spectral_norm_impl<Mat>(A);
}

inline double op_norm(const Mat& A, Norm from, Norm to) {
  if (from == Norm::inf && to == Norm::inf) return A.cwiseAbs().rowwise().sum().maxCoeff();
  if (from == Norm::one && to == Norm::one) return A.cwiseAbs().colwise().sum().maxCoeff();
  if (from == Norm::two && to == Norm::inf) return A.rowwise().norm().maxCoeff();
  if (from == Norm::two && to == Norm::two) return spectral_norm(A);
  fail(ErrorKind::unsupported_norm, std::string("pair ") + to_string(from) + "->" + to_string(to));
}

inline double op_norm(const DenseOperator& A, Norm from, Norm to) { return op_norm(A.mat(), from, to); }

using Selection = std::optional<IndexSet>;
inline const Selection all_indices = std::nullopt;

enum class RestrictMode { embedded, compact };

inline Mat restrict_mat(const Mat& A, const Selection& rows, const Selection& cols, RestrictMode mode) {
  auto check = [](const Selection& s, Eigen::Index n, const char* what) {
    if (!s) return;
    for (auto j : s->indices())
      require(j >= 1 && static_cast<Eigen::Index>(j) <= n, ErrorKind::invalid_index,
              std::string(what) + " index " + std::to_string(j) + " out of range");
  };
  check(rows, A.rows(), "row");
  check(cols, A.cols(), "column");
  std::vector<Eigen::Index> ri, ci;
  if (rows) ri = rows->zero_based();
  else for (Eigen::Index i = 0; i < A.rows(); ++i) ri.push_back(i);
  if (cols) ci = cols->zero_based();
  else for (Eigen::Index j = 0; j < A.cols(); ++j) ci.push_back(j);
  if (mode == RestrictMode::compact) return A(ri, ci);
  Mat out = Mat::Zero(A.rows(), A.cols());
  out(ri, ci) = A(ri, ci);
  return out;
}

inline DenseOperator restrict(const DenseOperator& A, const Selection& rows, const Selection& cols,
                              RestrictMode mode = RestrictMode::embedded) {
  Mat m = restrict_mat(A.mat(), rows, cols, mode);
  require(m.size() > 0, ErrorKind::invalid_dimension, "compact restriction selected nothing");
  return DenseOperator(std::move(m));
}

namespace detail {

template <class M>
M range_basis_impl(const M& B, double tol) {
  Eigen::JacobiSVD<M> svd(B, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  require(smax > 0.0, ErrorKind::zero_range, "range of the zero operator");
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > tol * smax) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace detail

// orthonormal basis (columns) of R(B), singular values <= tol*smax dropped
inline Mat range_basis(const Mat& B, double tol = 1e-10) {
  require(B.size() > 0, ErrorKind::zero_range, "range of an empty operator");
  if (is_real(B)) return detail::range_basis_impl<RMat>(B.real(), tol).cast<cplx>();
  return detail::range_basis_impl<Mat>(B, tol);
}

inline Mat range_projector_mat(const Mat& B, double tol = 1e-10) {
  Mat U = range_basis(B, tol);
  return matmul(U, Mat(U.adjoint()));
}

inline DenseOperator range_projector(const DenseOperator& B, double tol = 1e-10) {
  require(tol > 0, ErrorKind::invalid_input, "tolerance must be positive");
  return DenseOperator(range_projector_mat(B.mat(), tol));
}

inline Vec sign_vector(const Vec& z) {
  Vec s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double a = std::abs(z(i));
    s(i) = a > 0 ? z(i) / a : cplx(0.0);
  }
  return s;
}

inline Signal sign_vector(const Signal& z) { return Signal(sign_vector(z.vec())); }

// Moore-Penrose pseudoinverse via SVD with relative cutoff
inline Mat pseudo_inverse(const Mat& A, double tol = 1e-10) {
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  RVec inv = RVec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (smax > 0 && s(i) > tol * smax) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.cast<cplx>().asDiagonal() * svd.matrixU().adjoint();
}

// ||A^+||_{2->2} = 1/sigma_min over the retained spectrum
inline double pseudo_inverse_norm(const Mat& A, double tol = 1e-10) {
  RVec s;
  if (is_real(A)) s = Eigen::JacobiSVD<RMat>(A.real()).singularValues();
  else s = Eigen::JacobiSVD<Mat>(A).singularValues();
  if (s.size() == 0 || s(0) == 0.0) return inf;
  double smin = s(0);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) smin = s(i);
  return 1.0 / smin;
}

// smallest singular value of a matrix with at least as many columns as rows (0 when rank-deficient)
inline double min_singular_value(const Mat& A) {
  RVec s;
  if (is_real(A)) s = Eigen::JacobiSVD<RMat>(A.real()).singularValues();
  else s = Eigen::JacobiSVD<Mat>(A).singularValues();
  if (s.size() < std::min(A.rows(), A.cols())) return 0.0;
  return s(s.size() - 1);
}

}  // namespace framecs
