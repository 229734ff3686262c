#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "framecs/levels.hpp"
#include "framecs/linop.hpp"

namespace framecs {

template <class Op>
concept LinearMap = requires(const Op& op, const Vec& x) {
  { op.rows() } -> std::convertible_to<std::size_t>;
  { op.cols() } -> std::convertible_to<std::size_t>;
  { op.apply(x) } -> std::convertible_to<Vec>;
  { op.apply_adjoint(x) } -> std::convertible_to<Vec>;
};

enum class TransformKind { dft, haar_orthonormal, haar_frame2 };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::dft: return "dft";
    case TransformKind::haar_orthonormal: return "haar";
    case TransformKind::haar_frame2: return "haar-frame2";
  }
  return "?";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  if (s == "dft") return TransformKind::dft;
  if (s == "haar" || s == "haar_orthonormal") return TransformKind::haar_orthonormal;
  if (s == "haar-frame2" || s == "haar_frame2") return TransformKind::haar_frame2;
  fail(ErrorKind::invalid_input, "unknown transform kind '" + s + "'");
}

struct FrameSpec {
  TransformKind kind = TransformKind::haar_frame2;
  int p = 1;

  std::size_t n() const { return std::size_t(1) << p; }
  std::size_t analysis_rows() const { return kind == TransformKind::haar_frame2 ? 2 * n() : n(); }
  std::string ordering() const {
    return kind == TransformKind::dft ? "frequency 0,1,-1,2,-2,..."
                                      : "scaling first, then scale l = 0..p-1, translate k = 0..2^l-1";
  }
};

// signed frequencies in row order 0, 1, -1, 2, -2, ...
inline std::vector<long> dft_frequencies(std::size_t n) {
  std::vector<long> f;
  f.reserve(n);
  f.push_back(0);
  for (long k = 1; f.size() < n; ++k) {
    f.push_back(k);
    if (f.size() < n) f.push_back(-k);
  }
  return f;
}

inline DenseOperator dft_matrix(std::size_t n) {
  require(n >= 1, ErrorKind::invalid_dimension, "DFT size must be >= 1");
  auto freq = dft_frequencies(n);
  Mat V(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    long f = ((freq[r] % long(n)) + long(n)) % long(n);
    for (std::size_t j = 0; j < n; ++j) {
      // reduce f*j mod n before scaling so the phase stays exact for large n
      auto t = static_cast<double>((static_cast<unsigned long long>(f) * j) % n);
      double ang = -2.0 * std::numbers::pi * t / static_cast<double>(n);
      V(r, j) = scale * cplx(std::cos(ang), std::sin(ang));
    }
  }
  return DenseOperator(std::move(V));
}

namespace haar {

// one analysis row: value `amp` on [start, start+half), `-amp` on [start+half, start+len), cyclic;
// scaling rows have half == len (no sign flip)
struct Atom {
  std::size_t start;
  std::size_t len;
  std::size_t half;
  double amp;
};

inline void check_p(int p) {
  require(p >= 1 && p <= 24, ErrorKind::invalid_dimension, "log-dimension p must lie in [1, 24]");
}

// orthonormal basis row b (0-based): b = 0 -> c0, b = 2^l + k -> h_{l,k}
inline Atom basis_atom(int p, std::size_t b) {
  const std::size_t N = std::size_t(1) << p;
  if (b == 0) return {0, N, N, std::pow(2.0, -0.5 * p)};
  int l = 0;
  while ((std::size_t(2) << l) <= b) ++l;
  std::size_t k = b - (std::size_t(1) << l);
  std::size_t len = N >> l;
  return {k * len, len, len / 2, std::pow(2.0, 0.5 * (l - p))};
}

// redundancy-two frame row i: basis row i/2, cyclic shift by (i odd), scaled by 2^{-1/2}
inline Atom frame_atom(int p, std::size_t i) {
  const std::size_t N = std::size_t(1) << p;
  Atom a = basis_atom(p, i / 2);
  if (i % 2 == 1) a.start = (a.start + 1) % N;
  a.amp *= std::numbers::sqrt2 / 2.0;
  return a;
}

inline RVec dense_row(const Atom& a, std::size_t N) {
  RVec row = RVec::Zero(static_cast<Eigen::Index>(N));
  for (std::size_t t = 0; t < a.len; ++t) row((a.start + t) % N) = t < a.half ? a.amp : -a.amp;
  return row;
}

}  // namespace haar

inline DenseOperator haar_orthobasis(int p) {
  haar::check_p(p);
  const std::size_t N = std::size_t(1) << p;
  RMat D(N, N);
  for (std::size_t b = 0; b < N; ++b) D.row(b) = haar::dense_row(haar::basis_atom(p, b), N).transpose();
  return DenseOperator(D.cast<cplx>());
}

inline DenseOperator haar_frame_redundant(int p) {
  haar::check_p(p);
  const std::size_t N = std::size_t(1) << p;
  RMat D(2 * N, N);
  for (std::size_t i = 0; i < 2 * N; ++i) D.row(i) = haar::dense_row(haar::frame_atom(p, i), N).transpose();
  return DenseOperator(D.cast<cplx>());
}

struct WaveletLevelMap {
  int p = 1;
  LevelPartition basis;
  LevelPartition frame;
};

// basis: (2, 4, ..., 2^p); frame: the same with every boundary doubled
inline LevelPartition wavelet_levels(int p, bool frame) {
  haar::check_p(p);
  std::vector<std::size_t> b;
  for (int k = 1; k <= p; ++k) b.push_back((std::size_t(1) << k) * (frame ? 2 : 1));
  return LevelPartition(std::move(b));
}

inline WaveletLevelMap wavelet_level_map(int p) { return {p, wavelet_levels(p, false), wavelet_levels(p, true)}; }

inline DenseOperator make_operator(const FrameSpec& spec) {
  switch (spec.kind) {
    case TransformKind::dft: return dft_matrix(spec.n());
    case TransformKind::haar_orthonormal: return haar_orthobasis(spec.p);
    case TransformKind::haar_frame2: return haar_frame_redundant(spec.p);
  }
  fail(ErrorKind::invalid_input, "unknown transform");
}

// ---- matrix-free versions of the same operators (O(N log N) / O(N) per application)

class FastDft {
 public:
  explicit FastDft(std::size_t n) : n_(n), freq_(dft_frequencies(n)) {
    require(n >= 1, ErrorKind::invalid_dimension, "DFT size must be >= 1");
    for (auto& f : freq_) f = ((f % long(n)) + long(n)) % long(n);
  }
  std::size_t rows() const { return n_; }
  std::size_t cols() const { return n_; }

  Vec apply(const Vec& x) const {
    require(static_cast<std::size_t>(x.size()) == n_, ErrorKind::dimension_mismatch, "FastDft::apply");
    if (n_ == 1) return x;
    auto& fft = fft_engine();
    std::vector<cplx> in(x.data(), x.data() + n_), out;
    fft.fwd(out, in);
    Vec y(n_);
    const double s = 1.0 / std::sqrt(double(n_));
    for (std::size_t r = 0; r < n_; ++r) y(r) = out[static_cast<std::size_t>(freq_[r])] * s;
    return y;
  }
  Vec apply_adjoint(const Vec& y) const {
    require(static_cast<std::size_t>(y.size()) == n_, ErrorKind::dimension_mismatch, "FastDft::apply_adjoint");
    if (n_ == 1) return y;
    auto& fft = fft_engine();
    std::vector<cplx> in(n_), out;
    for (std::size_t r = 0; r < n_; ++r) in[static_cast<std::size_t>(freq_[r])] = y(r);
    fft.inv(out, in);
    Vec x(n_);
    const double s = std::sqrt(double(n_));
    for (std::size_t j = 0; j < n_; ++j) x(j) = out[j] * s;
    return x;
  }

 private:
  // plans are cached per size inside the engine; one engine per thread
  static Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;
    return engine;
  }
  std::size_t n_;
  std::vector<long> freq_;
};

class FastHaar {
 public:
  FastHaar(int p, bool frame) : p_(p), frame_(frame) {
    haar::check_p(p);
    N_ = std::size_t(1) << p;
    atoms_.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i) atoms_.push_back(frame ? haar::frame_atom(p, i) : haar::basis_atom(p, i));
  }
  std::size_t rows() const { return frame_ ? 2 * N_ : N_; }
  std::size_t cols() const { return N_; }

  Vec apply(const Vec& x) const {
    require(static_cast<std::size_t>(x.size()) == N_, ErrorKind::dimension_mismatch, "FastHaar::apply");
    std::vector<cplx> S(2 * N_ + 1);
    S[0] = 0;
    for (std::size_t t = 0; t < 2 * N_; ++t) S[t + 1] = S[t] + x(t % N_);
    Vec z(rows());
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      cplx pos = S[a.start + a.half] - S[a.start];
      cplx neg = S[a.start + a.len] - S[a.start + a.half];
      z(i) = a.amp * (pos - neg);
    }
    return z;
  }
  // D X for a real block X (n x k), column by column
  RMat apply_block(const RMat& X) const {
    require(static_cast<std::size_t>(X.rows()) == N_, ErrorKind::dimension_mismatch, "FastHaar::apply_block");
    RMat Z(rows(), X.cols());
    std::vector<double> S(2 * N_ + 1);
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      S[0] = 0;
      for (std::size_t t = 0; t < 2 * N_; ++t) S[t + 1] = S[t] + X(t % N_, c);
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& a = atoms_[i];
        Z(i, c) = a.amp * ((S[a.start + a.half] - S[a.start]) - (S[a.start + a.len] - S[a.start + a.half]));
      }
    }
    return Z;
  }

  Vec apply_adjoint(const Vec& z) const {
    require(static_cast<std::size_t>(z.size()) == rows(), ErrorKind::dimension_mismatch, "FastHaar::apply_adjoint");
    std::vector<cplx> diff(2 * N_ + 1, cplx(0.0));
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      cplx v = a.amp * z(i);
      diff[a.start] += v;
      diff[a.start + a.half] -= 2.0 * v;
      diff[a.start + a.len] += v;
    }
    Vec x = Vec::Zero(N_);
    cplx run = 0;
    for (std::size_t t = 0; t < 2 * N_; ++t) {
      run += diff[t];
      x(t % N_) += run;
    }
    return x;
  }

 private:
  int p_;
  bool frame_;
  std::size_t N_;
  std::vector<haar::Atom> atoms_;
};

template <LinearMap Op>
Mat materialize(const Op& op) {
  Mat A(op.rows(), op.cols());
  for (std::size_t j = 0; j < op.cols(); ++j) {
    Vec e = Vec::Zero(op.cols());
    e(j) = 1;
    A.col(j) = op.apply(e);
  }
  return A;
}

}  // namespace framecs
