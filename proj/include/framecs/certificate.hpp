#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "framecs/diagnostics.hpp"
#include "framecs/levels.hpp"
#include "framecs/linop.hpp"
#include "framecs/random.hpp"
#include "framecs/sampling.hpp"
#include "framecs/transforms.hpp"

namespace framecs {

// ---- T: per sparsity level weight 1/max{1, sqrt(r kappa_k)}

class ScalingOperator {
 public:
  ScalingOperator() = default;
  ScalingOperator(const LevelPartition& N, std::vector<double> kappa, std::size_t ambient)
      : N_(N), kappa_(std::move(kappa)) {
    require(kappa_.size() == N.r(), ErrorKind::invalid_input, "one kappa per sparsity level required");
    const double r = double(N.r());
    diag_ = RVec::Ones(static_cast<Eigen::Index>(ambient));
    for (std::size_t k = 1; k <= N.r(); ++k) {
      require(kappa_[k - 1] >= 0 && std::isfinite(kappa_[k - 1]), ErrorKind::invalid_input, "kappa must be finite, >= 0");
      auto [lo, hi] = N.span(k, ambient);
      double wgt = 1.0 / std::max(1.0, std::sqrt(r * kappa_[k - 1]));
      weights_.push_back(wgt);
      diag_.segment(lo, hi - lo).setConstant(wgt);
    }
  }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& kappa() const { return kappa_; }
  const RVec& diagonal() const { return diag_; }
  double kappa_max() const { return double(kappa_.size()) * *std::max_element(kappa_.begin(), kappa_.end()); }
  double kappa_min() const { return double(kappa_.size()) * *std::min_element(kappa_.begin(), kappa_.end()); }

  Vec apply(const Vec& z) const { return diag_.cast<cplx>().cwiseProduct(z); }
  Vec apply_inverse(const Vec& z) const { return diag_.cwiseInverse().cast<cplx>().cwiseProduct(z); }
  double norm() const { return diag_.maxCoeff(); }
  double inverse_norm() const { return diag_.cwiseInverse().maxCoeff(); }

  // ||T|| <= 1/sqrt(kappa_min), ||T^-1|| <= sqrt(kappa_max)
  bool bounds_hold(double tol = 1e-12) const {
    double km = kappa_min(), kM = kappa_max();
    bool a = km <= 0 || norm() <= 1.0 / std::sqrt(km) + tol;
    bool b = inverse_norm() <= std::sqrt(kM) + tol;
    return a && b;
  }

 private:
  LevelPartition N_;
  std::vector<double> kappa_;
  std::vector<double> weights_;
  RVec diag_;
};

// ---- splitting q_k into mu Bernoulli batches

struct SplitDensities {
  std::vector<std::vector<double>> q;  // q[j][k], j = 0..mu-1
  std::vector<double> q_tilde;
  double max_product_error = 0;
};

inline SplitDensities split_densities(const std::vector<double>& qk, std::size_t mu) {
  require(mu >= 3, ErrorKind::invalid_input, "mu must be >= 3");
  SplitDensities s;
  s.q.assign(mu, std::vector<double>(qk.size(), 0.0));
  for (std::size_t k = 0; k < qk.size(); ++k) {
    double q = qk[k];
    require(q >= 0 && q <= 1, ErrorKind::invalid_input, "densities must lie in [0,1]");
    double qt = 1.0 - std::pow((1.0 - q) / ((1.0 - q / 4) * (1.0 - q / 4)), 1.0 / double(mu - 2));
    qt = std::clamp(qt, 0.0, 1.0);
    s.q_tilde.push_back(qt);
    s.q[0][k] = s.q[1][k] = q / 4;
    for (std::size_t j = 2; j < mu; ++j) s.q[j][k] = qt;
    double prod = 1.0;
    for (std::size_t j = 0; j < mu; ++j) prod *= 1.0 - s.q[j][k];
    s.max_product_error = std::max(s.max_product_error, std::abs(prod - (1.0 - q)));
  }
  return s;
}

// ---- L: Theorem form and the form coming out of the golfing bound on ||w||

inline double L_theorem(double epsilon, double q, std::size_t M, double kappa_max) {
  require(epsilon > 0 && epsilon < 1, ErrorKind::invalid_input, "epsilon must lie in (0,1)");
  double den = std::log2(4.0 * double(M) * std::sqrt(kappa_max) / q);
  require(den > 0, ErrorKind::division_guard, "log2(4 M sqrt(kappa_max)/q) must be positive");
  return 1.0 + std::sqrt(std::log2(6.0 / epsilon)) / den;
}

inline double L_golfing(double K, double epsilon, double q, double kappa_max, double mtilde, double dd_norm) {
  double c = std::sqrt(kappa_max) * mtilde * dd_norm / q;
  double den = std::log(4.0 * c);
  require(den > 0, ErrorKind::division_guard, "log(4 q^-1 sqrt(kappa) M~ ||DD*||) must be positive");
  return std::sqrt(K * (std::log(8.0 * c) + std::log(6.0 / epsilon)) / den);
}

// ---- certificate verdicts

struct ConditionVerdict {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool strict = false;
  bool pass = false;
};

struct CertificateVerdict {
  std::vector<ConditionVerdict> conditions;  // (i) .. (v)
  double q = 0;
  double kappa = 0;
  double L = 0;
  double tail_l1 = 0;        // ||P_Delta^perp D f||_1
  double rho_residual = 0;   // ||rho - V* P_Omega w||
  double sup_tail = 0;       // largest diagonal entry of (ii) among the last quarter of frame rows

  bool all_pass() const {
    return !conditions.empty() &&
           std::all_of(conditions.begin(), conditions.end(), [](const ConditionVerdict& c) { return c.pass; });
  }
  // constant taken as 1
  double error_bound(double delta) const { return delta * (1.0 / std::sqrt(q) + L * std::sqrt(kappa)) + tail_l1; }
  double error_bound_unconstrained(double delta) const {
    return delta * (1.0 / std::sqrt(q) + L * std::sqrt(kappa) + std::sqrt(q) * L * L * kappa) + tail_l1;
  }
  double alpha_unconstrained(double delta) const { return std::sqrt(q) * delta; }
};

namespace detail {

inline Mat w_basis(const Mat& D, const IndexSet& Delta) {
  const auto n = D.cols();
  if (Delta.size() == 0) return Mat::Zero(n, 0);
  Mat B(n, static_cast<Eigen::Index>(Delta.size()));
  Eigen::Index c = 0;
  for (auto i : Delta.indices()) B.col(c++) = D.row(static_cast<Eigen::Index>(i - 1)).adjoint();
  if (B.cwiseAbs().maxCoeff() == 0) return Mat::Zero(n, 0);
  return range_basis(B);
}

inline Vec restrict_to(const Vec& z, const IndexSet& S, bool complement) {
  Vec out = z;
  auto m = S.mask();
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (bool(m[static_cast<std::size_t>(i)]) == complement) out(i) = 0;
  return out;
}

// weights 1/q_k on the sampled rows of each level, 0 elsewhere
inline RVec sample_weights(const LevelPartition& M, const std::vector<IndexSet>& omega, const std::vector<double>& q,
                           std::size_t rows) {
  RVec wgt = RVec::Zero(static_cast<Eigen::Index>(rows));
  for (std::size_t k = 1; k <= M.r(); ++k)
    if (q[k - 1] > 0)
      for (auto i : omega[k - 1].indices()) wgt(static_cast<Eigen::Index>(i - 1)) = 1.0 / q[k - 1];
  return wgt;
}

inline std::vector<IndexSet> to_index_sets(std::vector<std::vector<std::size_t>> picks, std::size_t ambient) {
  std::vector<IndexSet> out;
  for (auto& p : picks) out.emplace_back(std::move(p), ambient);
  return out;
}

struct Subspace {
  Mat U;   // orthonormal basis of W
  Mat Q;   // projector onto W
  Mat Qp;  // projector onto W^perp
};

inline Subspace subspace(const Mat& D, const IndexSet& Delta) {
  Subspace s;
  s.U = w_basis(D, Delta);
  const auto n = D.cols();
  s.Q = s.U.cols() ? Mat(s.U * s.U.adjoint()) : Mat::Zero(n, n);
  s.Qp = Mat::Identity(n, n) - s.Q;
  return s;
}

}  // namespace detail

// omega_levels: Omega_k as 1-based row sets of V; q: the weights of P = sum q_k^-1 P_{Omega_k}
inline CertificateVerdict verify_certificate(const Mat& V, const Mat& D, const IndexSet& Delta, const Vec& f,
                                             const Vec& rho, const Vec& w, const LevelPartition& M,
                                             const std::vector<IndexSet>& omega_levels, const std::vector<double>& q,
                                             double kappa, double L) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  require(f.size() == D.cols() && rho.size() == D.cols(), ErrorKind::dimension_mismatch, "f / rho length");
  require(w.size() == V.rows(), ErrorKind::dimension_mismatch, "w length");
  require(omega_levels.size() == M.r() && q.size() == M.r(), ErrorKind::invalid_input, "one Omega_k and q_k per level");
  require(Delta.ambient() == static_cast<std::size_t>(D.rows()), ErrorKind::dimension_mismatch, "Delta ambient");
  const auto W = detail::subspace(D, Delta);
  RVec pw = detail::sample_weights(M, omega_levels, q, static_cast<std::size_t>(V.rows()));
  Mat PV = pw.cast<cplx>().asDiagonal() * V;
  Mat G = V.adjoint() * PV;  // V* P V

  CertificateVerdict v;
  v.q = *std::min_element(q.begin(), q.end());
  v.kappa = kappa;
  v.L = L;
  auto add = [&](std::string name, double value, double thr, bool strict) {
    bool ok = strict ? value < thr : value <= thr;
    v.conditions.push_back({std::move(name), value, thr, strict, ok});
  };
  add("i", spectral_norm(Mat(W.Q * G * W.Q - W.Q)), 0.25, true);

  Mat H = D * W.Qp * G * W.Qp * D.adjoint();
  RVec dg = H.diagonal().real();
  add("ii", dg.size() ? dg.maxCoeff() : 0.0, 1.25, true);
  Eigen::Index tail = std::max<Eigen::Index>(1, dg.size() / 4);
  v.sup_tail = dg.size() ? dg.tail(tail).maxCoeff() : 0.0;

  Vec Df = D * f;
  Vec sg = detail::restrict_to(sign_vector(Df), Delta, false);
  add("iii", (D.adjoint() * sg - W.Q * rho).norm(), std::sqrt(v.q) / 8.0, false);
  Vec off = detail::restrict_to(D * (W.Qp * rho), Delta, true);
  add("iv", off.size() ? off.cwiseAbs().maxCoeff() : 0.0, 0.5, false);
  add("v", w.norm(), L * std::sqrt(kappa), false);

  v.tail_l1 = detail::restrict_to(Df, Delta, true).cwiseAbs().sum();
  IndexSet all_omega;
  {
    std::vector<std::size_t> idx;
    for (const auto& s : omega_levels) idx.insert(idx.end(), s.indices().begin(), s.indices().end());
    all_omega = IndexSet::from_unsorted(idx, static_cast<std::size_t>(V.rows()));
  }
  Vec pwv = detail::restrict_to(w, all_omega, false);
  v.rho_residual = (rho - V.adjoint() * pwv).norm();
  return v;
}

// ---- golfing

struct GolfingConfig {
  LevelPartition M;            // sampling levels of V
  LevelPartition N;            // sparsity levels of D
  std::vector<double> q;       // q_k per sampling level
  double epsilon = 0.1;
  std::optional<std::size_t> mu, nu;  // overrides; paper defaults otherwise
  std::vector<double> kappa;   // kappa_k per sparsity level; estimated when empty
  std::size_t kappa_trials = 200;
  std::optional<double> mtilde;  // M~ (including the ||DD*|| factor); computed when unset
  bool L_from_golfing = false;   // condition (v) uses the golfing form of L instead of the Theorem form
  std::uint64_t seed = 0;
};

struct GolfingStep {
  std::size_t i = 0;
  bool accepted = false;
  bool event_a = false, event_b = false;
  double alpha = 0, beta = 0;
  double a_lhs = 0;       // ||TD(Z - Q_W V*U V Z)||
  double a_lhs_raw = 0;   // same without Q_W
  double b_lhs = 0;       // ||P_Delta^perp D Q_W^perp V*U V Z||_inf
  double tdz = 0;         // ||TD Z_{i-1}||
  double tdz_after = 0;   // ||TD Z_i||
  double z_norm = 0;      // ||Z_i||
  std::size_t batch = 0;  // |Omega^i|
  double K = 0;           // max_k 1/q_k^i
  double identity_error = 0;  // recursive vs closed-form Z_i
  bool contraction_ok = true;
};

struct CertificateResult {
  Vec rho, w;
  std::vector<std::size_t> theta;  // Theta_mu, 1-based iteration numbers
  std::vector<GolfingStep> log;
  std::vector<double> tdz_trace;
  std::vector<IndexSet> omega_levels;  // union over all batches, per level
  IndexSet omega;
  std::size_t mu = 0, nu = 0;
  double nu_raw = 0;
  double gamma = 0;
  double L_hat = 0;
  std::vector<double> q_tilde;
  double split_error = 0;
  std::vector<double> kappa;
  double kappa_max = 0;
  double mtilde = 0;
  bool mtilde_fallback = false;
  double dd_norm = 0;
  double L_thm = 0, L_golf = 0, L = 0;
  bool t_bounds = false;
  bool success = false;     // |Theta_mu| >= nu
  bool degenerate = false;  // nu = 0 or Z_0 = 0
  double rho_residual = 0;  // ||rho - V* P_Omega w||
  double max_identity_error = 0;
  double w_bound = 0;       // sum of the per-term bounds
  bool w_bound_ok = true;
  bool algebra_ok = true;
  CertificateVerdict verdict;

  bool certified() const { return success && verdict.all_pass() && algebra_ok; }
};

// kappa_k for the sparsity pattern of Delta (Monte Carlo lower bound at p = 1)
inline std::vector<double> delta_kappa(const Mat& D, const LevelPartition& N, const IndexSet& Delta, std::size_t trials,
                                       std::uint64_t seed) {
  std::vector<std::size_t> s(N.r(), 0);
  for (auto i : Delta.indices()) ++s[N.level_of(i) - 1];
  if (Delta.size() == 0) return std::vector<double>(N.r(), 0.0);
  auto e = kappa_localized(DenseOperator(D), N, s, 1.0, trials, seed, 1);
  return e.levels;
}

inline CertificateResult golfing_construct(const Mat& V, const Mat& D, const IndexSet& Delta, const Vec& f,
                                           const GolfingConfig& cfg) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  require(f.size() == D.cols(), ErrorKind::dimension_mismatch, "f length");
  require(Delta.ambient() == static_cast<std::size_t>(D.rows()), ErrorKind::dimension_mismatch,
          "Delta must index rows of D");
  require(cfg.q.size() == cfg.M.r(), ErrorKind::invalid_input, "one q_k per sampling level");
  require(cfg.M.total() == static_cast<std::size_t>(V.rows()), ErrorKind::invalid_input,
          "sampling levels must cover the rows of V");
  for (double q : cfg.q) require(q > 0 && q <= 1, ErrorKind::invalid_input, "q_k must lie in (0,1]");
  const std::size_t nrow = static_cast<std::size_t>(V.rows());
  const std::size_t drow = static_cast<std::size_t>(D.rows());

  CertificateResult res;
  res.gamma = cfg.epsilon / 6.0;
  const double q = *std::min_element(cfg.q.begin(), cfg.q.end());
  res.kappa = cfg.kappa.empty() ? delta_kappa(D, cfg.N, Delta, cfg.kappa_trials, derive_seed(cfg.seed, {0x6a}))
                                : cfg.kappa;
  ScalingOperator T(cfg.N, res.kappa, drow);
  res.kappa_max = std::max(T.kappa_max(), 1e-300);
  res.t_bounds = T.bounds_hold();

  Mat DDt = D * D.adjoint();
  res.dd_norm = op_norm(DDt, Norm::inf, Norm::inf);
  if (cfg.mtilde) {
    res.mtilde = *cfg.mtilde;
  } else {
    auto tm = tilde_m(V, D, nrow, drow, std::max(res.kappa_max, 1e-12), q);
    res.mtilde_fallback = !tm.value.has_value();
    res.mtilde = tm.value ? *tm.value : res.dd_norm * double(drow);
  }
  const double c = std::sqrt(std::max(res.kappa_max, 1.0)) * res.mtilde * res.dd_norm / q;
  res.L_hat = std::log(4.0 * c);
  res.nu_raw = std::log(8.0 * c);
  res.nu = cfg.nu ? *cfg.nu : static_cast<std::size_t>(std::ceil(res.nu_raw));
  res.mu = cfg.mu ? *cfg.mu
                  : 8 * static_cast<std::size_t>(std::ceil(3.0 * double(res.nu) + std::log(std::pow(res.gamma, -0.5))));
  require(res.mu >= 3, ErrorKind::invalid_input, "mu must be >= 3");
  auto split = split_densities(cfg.q, res.mu);
  res.q_tilde = split.q_tilde;
  res.split_error = split.max_product_error;

  double K = 0;
  for (double qk : cfg.q) K = std::max(K, 1.0 / qk);
  res.L_thm = L_theorem(cfg.epsilon, q, nrow, std::max(res.kappa_max, 1.0));
  res.L_golf = L_golfing(K, cfg.epsilon, q, std::max(res.kappa_max, 1.0), res.mtilde, res.dd_norm);
  res.L = cfg.L_from_golfing ? res.L_golf : res.L_thm;

  const auto W = detail::subspace(D, Delta);
  Vec Df = D * f;
  Vec Z0 = D.adjoint() * detail::restrict_to(sign_vector(Df), Delta, false);
  auto tdz = [&](const Vec& z) { return T.apply(D * z).norm(); };
  const Vec zero_n = Vec::Zero(D.cols());

  std::vector<std::vector<std::size_t>> all(cfg.M.r());
  Vec Z = Z0, Y = zero_n;
  res.w = Vec::Zero(V.rows());
  res.rho = zero_n;
  res.degenerate = res.nu == 0 || Z0.norm() == 0;
  res.tdz_trace.push_back(tdz(Z0));
  for (std::size_t i = 1; i <= res.mu; ++i) {
    const auto& qj = split.q[i - 1];
    auto picks = detail::to_index_sets(bernoulli_draw(cfg.M, qj, derive_seed(cfg.seed, {0x601, i})), nrow);
    RVec uw = detail::sample_weights(cfg.M, picks, qj, nrow);
    GolfingStep st;
    st.i = i;
    st.alpha = i <= 2 ? 1.0 / (2.0 * std::sqrt(res.L_hat)) : 0.5;
    st.beta = i <= 2 ? 0.25 : res.L_hat / 4.0;
    for (std::size_t k = 0; k < picks.size(); ++k) {
      st.batch += picks[k].size();
      all[k].insert(all[k].end(), picks[k].indices().begin(), picks[k].indices().end());
      if (qj[k] > 0) st.K = std::max(st.K, 1.0 / qj[k]);
    }
    Vec uvz = uw.cast<cplx>().cwiseProduct(V * Z);
    Vec y = V.adjoint() * uvz;
    Vec Qy = W.Q * y;
    st.tdz = tdz(Z);
    st.a_lhs = tdz(Vec(Z - Qy));
    st.a_lhs_raw = tdz(Vec(Z - y));
    st.b_lhs = W.Q.rows() ? detail::restrict_to(D * (W.Qp * y), Delta, true).cwiseAbs().maxCoeff() : 0.0;
    st.event_a = st.a_lhs <= st.alpha * st.tdz;
    st.event_b = st.b_lhs <= st.beta * st.tdz;
    st.accepted = i <= 2 || (st.event_a && st.event_b);
    if (st.accepted) {
      res.theta.push_back(i);
      Y += y;
      Vec closed = Z0 - W.Q * Y;
      Vec recursive = W.Q * Z - Qy;
      st.identity_error = (closed - recursive).norm();
      res.max_identity_error = std::max(res.max_identity_error, st.identity_error);
      if (res.theta.size() <= res.nu) {
        res.w += uvz;
        double zp = Z.norm(), zn = closed.norm();
        res.w_bound += std::sqrt(st.K * zp * (zp + zn));
      }
      Z = closed;
      if (res.theta.size() == res.nu) res.rho = Y;
      st.tdz_after = tdz(Z);
      if (i >= 3) st.contraction_ok = st.tdz_after <= st.alpha * st.tdz * (1 + 1e-12) + 1e-15;
    } else {
      st.tdz_after = st.tdz;
    }
    st.z_norm = Z.norm();
    res.tdz_trace.push_back(st.tdz_after);
    res.log.push_back(st);
  }
  res.success = res.theta.size() >= res.nu;
  if (!res.success) res.rho = Y;

  for (std::size_t k = 0; k < all.size(); ++k) res.omega_levels.push_back(IndexSet::from_unsorted(all[k], nrow));
  {
    std::vector<std::size_t> idx;
    for (auto& a : all) idx.insert(idx.end(), a.begin(), a.end());
    res.omega = IndexSet::from_unsorted(idx, nrow);
  }
  res.verdict = verify_certificate(V, D, Delta, f, res.rho, res.w, cfg.M, res.omega_levels, cfg.q, res.kappa_max, res.L);
  res.rho_residual = res.verdict.rho_residual;
  res.w_bound_ok = res.w.norm() <= res.w_bound * (1 + 1e-12) + 1e-14;
  res.algebra_ok = res.rho_residual <= 1e-10 && res.max_identity_error <= 1e-9 && res.w_bound_ok &&
                   std::all_of(res.log.begin(), res.log.end(), [](const GolfingStep& s) { return s.contraction_ok; });
  return res;
}

// ---- Monte Carlo frequency checks for the concentration propositions

enum class Scenario { prop1, prop2, prop3, prop4 };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::prop1: return "prop1";
    case Scenario::prop2: return "prop2";
    case Scenario::prop3: return "prop3";
    case Scenario::prop4: return "prop4";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  for (auto k : {Scenario::prop1, Scenario::prop2, Scenario::prop3, Scenario::prop4})
    if (to_string(k) == s) return k;
  fail(ErrorKind::invalid_input, "unknown scenario '" + s + "'");
}

struct WilsonInterval {
  double lo = 0, hi = 0;
};

inline WilsonInterval wilson_interval(std::size_t hits, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  double p = double(hits) / double(n), z2 = z * z, nn = double(n);
  double den = 1 + z2 / nn;
  double mid = (p + z2 / (2 * nn)) / den;
  double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / den;
  return {std::max(0.0, mid - half), std::min(1.0, mid + half)};
}

struct ConcentrationReport {
  Scenario scenario = Scenario::prop1;
  std::size_t trials = 0, hits = 0;
  double frequency = 0;
  WilsonInterval interval;
  double gamma = 0.1;
  double alpha = 0;
  double side_value = 0;  // deterministic hypothesis of the proposition
  double side_threshold = 0;
  bool side_holds = true;
  double max_statistic = 0;
  bool pass = false;  // Wilson upper end <= gamma
};

struct ConcentrationOptions {
  double gamma = 0.1;
  std::vector<double> kappa;  // for T; estimated when empty
  std::size_t kappa_trials = 200;
  std::size_t threads = 0;
};

inline ConcentrationReport concentration_check(Scenario sc, const Mat& V, const Mat& D, const IndexSet& Delta,
                                               const LevelPartition& M, const LevelPartition& N,
                                               const std::vector<double>& q, double alpha, std::size_t trials,
                                               std::uint64_t seed, const ConcentrationOptions& opt = {}) {
  require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D act on different spaces");
  require(q.size() == M.r(), ErrorKind::invalid_input, "one q_k per sampling level");
  require(M.total() <= static_cast<std::size_t>(V.rows()), ErrorKind::invalid_input, "levels exceed rows of V");
  for (double x : q) require(x > 0 && x <= 1, ErrorKind::invalid_input, "q_k must lie in (0,1]");
  const std::size_t drow = static_cast<std::size_t>(D.rows());
  const auto W = detail::subspace(D, Delta);
  auto kap = opt.kappa.empty() ? delta_kappa(D, N, Delta, opt.kappa_trials, derive_seed(seed, {0x6a})) : opt.kappa;
  ScalingOperator T(N, kap, drow);
  const auto n = D.cols();

  auto rng = make_rng(seed, {0x6b});
  Vec g;
  if (sc == Scenario::prop2) {
    g = gaussian_complex(rng, static_cast<std::size_t>(n));
  } else {
    g = W.U.cols() ? Vec(W.U * gaussian_complex(rng, static_cast<std::size_t>(W.U.cols()))) : Vec(Vec::Zero(n));
  }
  const double tdg = T.apply(D * W.Q * g).norm();

  ConcentrationReport rep;
  rep.scenario = sc;
  rep.trials = trials;
  rep.gamma = opt.gamma;
  rep.alpha = alpha;
  Mat VM = V.topRows(static_cast<Eigen::Index>(M.total()));
  Mat GM = VM.adjoint() * VM;  // V* P_[M] V
  Mat Tinv = T.diagonal().cwiseInverse().cast<cplx>().asDiagonal();
  Mat Tm = T.diagonal().cast<cplx>().asDiagonal();
  switch (sc) {
    case Scenario::prop1:
      rep.side_value = spectral_norm(Mat(Tm * D * (W.Q * GM * W.Q - W.Q) * D.adjoint() * Tinv));
      rep.side_threshold = alpha / 2;
      break;
    case Scenario::prop2:
      rep.side_value = op_norm(Mat(D * W.Qp * GM * W.Q * D.adjoint() * Tinv), Norm::two, Norm::inf);
      rep.side_threshold = alpha / 2;
      break;
    case Scenario::prop3:
      rep.side_value = spectral_norm(Mat(W.Q * (V.adjoint() * V - GM) * W.Q));
      rep.side_threshold = alpha / 2;
      break;
    case Scenario::prop4:
      rep.side_threshold = inf;
      break;
  }
  rep.side_holds = rep.side_value <= rep.side_threshold;
  const Mat Gfull = V.adjoint() * V;

  std::vector<double> stat(trials, 0.0);
  std::vector<char> hit(trials, 0);
  parallel_for(
      trials,
      [&](std::size_t t) {
        auto picks = detail::to_index_sets(bernoulli_draw(M, q, derive_seed(seed, {0x6c, t})), M.total());
        RVec pw = RVec::Zero(V.rows());
        pw.head(M.total()) = detail::sample_weights(M, picks, q, M.total());
        Mat PV = pw.cast<cplx>().asDiagonal() * V;
        double s = 0;
        bool h = false;
        switch (sc) {
          case Scenario::prop1: {
            Vec y = W.Q * (V.adjoint() * (PV * (W.Q * g))) - W.Q * g;
            s = T.apply(D * y).norm();
            h = s >= alpha * tdg;
            break;
          }
          case Scenario::prop2: {
            Vec y = D * (W.Qp * (V.adjoint() * (PV * (W.Q * g))));
            s = detail::restrict_to(y, Delta, true).cwiseAbs().maxCoeff();
            h = s >= alpha * tdg;
            break;
          }
          case Scenario::prop3: {
            Mat G = V.adjoint() * PV;
            s = spectral_norm(Mat(W.Q * (G - Gfull) * W.Q));
            h = s >= alpha;
            break;
          }
          case Scenario::prop4: {
            Mat X = W.Qp * D.adjoint();
            Mat PX = PV * X;
            RVec dg = (X.adjoint() * (V.adjoint() * PX)).diagonal().real();
            s = dg.maxCoeff();
            h = s >= 1.25;
            break;
          }
        }
        stat[t] = s;
        hit[t] = h;
      },
      opt.threads);
  for (std::size_t t = 0; t < trials; ++t) {
    rep.hits += hit[t] ? 1 : 0;
    rep.max_statistic = std::max(rep.max_statistic, stat[t]);
  }
  rep.frequency = trials ? double(rep.hits) / double(trials) : 0.0;
  rep.interval = wilson_interval(rep.hits, trials);
  rep.pass = trials > 0 && rep.interval.hi <= opt.gamma;
  return rep;
}

// ---- seeded batch of constructions: DFT rows vs the redundant Haar frame, dyadic levels, q_k = q,
// Delta uniform of size s among the frame rows, f = D* x with Gaussian x on Delta

struct SuiteOptions {
  int p = 6;
  std::size_t s = 4;
  double q = 0.9;
  std::size_t trials = 50;
  std::uint64_t seed = 0;
  std::optional<std::size_t> mu, nu;
  double epsilon = 0.1;
  bool L_from_golfing = false;
  std::size_t threads = 0;
};

struct SuiteTrial {
  IndexSet Delta;
  CertificateResult result;
};

struct SuiteSummary {
  std::vector<SuiteTrial> trials;
  std::size_t succeeded = 0, certified = 0, algebra_ok = 0;
  std::vector<std::size_t> condition_passes;  // per condition (i)..(v)
  std::size_t accepted_steps = 0, accepted_steps_ok = 0;
};

inline SuiteSummary certificate_suite(const SuiteOptions& o) {
  const std::size_t n = std::size_t(1) << o.p;
  const Mat V = dft_matrix(n).mat();
  const Mat D = haar_frame_redundant(o.p).mat();
  const auto Ml = wavelet_levels(o.p, false), Nl = wavelet_levels(o.p, true);
  require(o.s <= 2 * n, ErrorKind::invalid_input, "s exceeds the frame size");
  SuiteSummary sum;
  sum.trials.resize(o.trials);
  parallel_for(
      o.trials,
      [&](std::size_t t) {
        auto rng = make_rng(o.seed, {0x5e, t});
        auto d = sample_without_replacement(rng, 2 * n, o.s);
        for (auto& x : d) x += 1;
        IndexSet Delta(d, 2 * n);
        Vec x = Vec::Zero(static_cast<Eigen::Index>(2 * n));
        std::normal_distribution<double> nd;
        for (auto i : d) x(static_cast<Eigen::Index>(i - 1)) = nd(rng);
        GolfingConfig c{Ml, Nl, std::vector<double>(Ml.r(), o.q)};
        c.epsilon = o.epsilon;
        c.mu = o.mu;
        c.nu = o.nu;
        c.L_from_golfing = o.L_from_golfing;
        c.seed = derive_seed(o.seed, {0x5f, t});
        sum.trials[t] = {Delta, golfing_construct(V, D, Delta, Vec(D.adjoint() * x), c)};
      },
      o.threads);
  sum.condition_passes.assign(5, 0);
  for (const auto& tr : sum.trials) {
    const auto& r = tr.result;
    sum.succeeded += r.success;
    sum.certified += r.certified();
    sum.algebra_ok += r.algebra_ok;
    for (std::size_t k = 0; k < 5; ++k) sum.condition_passes[k] += r.verdict.conditions[k].pass;
    for (const auto& st : r.log)
      if (st.accepted) {
        ++sum.accepted_steps;
        sum.accepted_steps_ok += st.identity_error <= 1e-9 && st.contraction_ok;
      }
  }
  return sum;
}

// ---- JSON

inline nlohmann::json to_json(const CertificateResult& r) {
  nlohmann::json j;
  j["success"] = r.success;
  j["certified"] = r.certified();
  j["degenerate"] = r.degenerate;
  j["mu"] = r.mu;
  j["nu"] = r.nu;
  j["nu_raw"] = r.nu_raw;
  j["gamma"] = r.gamma;
  j["L_hat"] = r.L_hat;
  j["q_tilde"] = r.q_tilde;
  j["split_product_error"] = r.split_error;
  j["kappa"] = r.kappa;
  j["kappa_max"] = r.kappa_max;
  j["mtilde"] = r.mtilde;
  j["mtilde_fallback"] = r.mtilde_fallback;
  j["dd_norm"] = r.dd_norm;
  j["L_theorem"] = r.L_thm;
  j["L_golfing"] = r.L_golf;
  j["L"] = r.L;
  j["T_bounds_hold"] = r.t_bounds;
  j["theta"] = r.theta;
  j["tdz_trace"] = r.tdz_trace;
  j["rho_residual"] = r.rho_residual;
  j["max_identity_error"] = r.max_identity_error;
  j["w_norm"] = r.w.norm();
  j["w_bound"] = r.w_bound;
  j["algebra_ok"] = r.algebra_ok;
  j["omega_size"] = r.omega.size();
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : r.verdict.conditions)
    conds.push_back({{"condition", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"strict", c.strict},
                     {"pass", c.pass}});
  j["conditions"] = conds;
  j["tail_l1"] = r.verdict.tail_l1;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : r.log)
    log.push_back({{"i", s.i},
                   {"accepted", s.accepted},
                   {"A", s.event_a},
                   {"B", s.event_b},
                   {"alpha", s.alpha},
                   {"beta", s.beta},
                   {"a_lhs", s.a_lhs},
                   {"a_lhs_unprojected", s.a_lhs_raw},
                   {"b_lhs", s.b_lhs},
                   {"tdz_before", s.tdz},
                   {"tdz_after", s.tdz_after},
                   {"z_norm", s.z_norm},
                   {"batch", s.batch},
                   {"K", s.K},
                   {"identity_error", s.identity_error},
                   {"contraction_ok", s.contraction_ok}});
  j["log"] = log;
  return j;
}

inline nlohmann::json to_json(const ConcentrationReport& r) {
  return {{"scenario", to_string(r.scenario)},
          {"trials", r.trials},
          {"hits", r.hits},
          {"frequency", r.frequency},
          {"wilson", {r.interval.lo, r.interval.hi}},
          {"gamma", r.gamma},
          {"alpha", r.alpha},
          {"side_value", r.side_value},
          {"side_threshold", r.side_threshold},
          {"side_holds", r.side_holds},
          {"max_statistic", r.max_statistic},
          {"pass", r.pass}};
}

}  // namespace framecs
