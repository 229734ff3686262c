#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "framecs/random.hpp"
#include "framecs/sampling.hpp"
#include "framecs/transforms.hpp"

namespace framecs {

struct SolverOptions {
  double feas_tol = 1e-8;
  double opt_tol = 1e-7;
  std::size_t max_iter = 200000;
  std::size_t window = 50;
};

struct RecoverySolution {
  Signal g;
  double objective = 0;     // ||Dg||_1 (constrained) or the composite value (unconstrained)
  double l1 = 0;            // ||Dg||_1
  double residual = 0;      // ||y - P_Omega V g||_2
  std::size_t iterations = 0;
  bool converged = false;
  double gap = 0;           // primal-dual optimality estimate
  double stationarity = 0;  // max-entry first-order residual
};

// P_Omega V as a map C^n -> C^|Omega|
template <LinearMap VOp>
class SampledMap {
 public:
  SampledMap(const VOp& V, const IndexSet& omega) : V_(&V), rows_(omega.zero_based()) {
    require(omega.ambient() <= V.rows(), ErrorKind::dimension_mismatch, "sampling set exceeds operator rows");
  }
  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return V_->cols(); }
  Vec apply(const Vec& x) const {
    Vec full = V_->apply(x);
    Vec y(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) y(i) = full(rows_[i]);
    return y;
  }
  Vec apply_adjoint(const Vec& y) const {
    Vec full = Vec::Zero(V_->rows());
    for (std::size_t i = 0; i < rows_.size(); ++i) full(rows_[i]) = y(i);
    return V_->apply_adjoint(full);
  }

 private:
  const VOp* V_;
  std::vector<Eigen::Index> rows_;
};

// dense specialisation keeps only the selected rows
template <>
class SampledMap<DenseOperator> {
 public:
  SampledMap(const DenseOperator& V, const IndexSet& omega) {
    require(omega.ambient() <= V.rows(), ErrorKind::dimension_mismatch, "sampling set exceeds operator rows");
    A_ = V.mat()(omega.zero_based(), Eigen::all);
    cols_ = V.cols();
  }
  std::size_t rows() const { return static_cast<std::size_t>(A_.rows()); }
  std::size_t cols() const { return cols_; }
  Vec apply(const Vec& x) const { return A_ * x; }
  Vec apply_adjoint(const Vec& y) const { return A_.adjoint() * y; }

 private:
  Mat A_;
  std::size_t cols_ = 0;
};

template <LinearMap VOp, LinearMap DOp>
struct RecoveryProblem {
  const VOp& V;
  const DOp& D;
  IndexSet omega;
  Vec y;
  double delta = 0;

  void validate() const {
    require(V.cols() == D.cols(), ErrorKind::dimension_mismatch, "V and D must share the input dimension");
    require(static_cast<std::size_t>(y.size()) == omega.size(), ErrorKind::dimension_mismatch,
            "one measurement per sampled index required");
    require(delta >= 0 && std::isfinite(delta), ErrorKind::invalid_input, "delta must be a finite nonnegative number");
    require(y.allFinite(), ErrorKind::invalid_input, "measurements must be finite");
  }
};

namespace detail {

template <LinearMap Op>
double power_norm(const Op& A, std::size_t iters = 100) {
  auto rng = make_rng(0x5eed, {A.rows(), A.cols()});
  Vec x = gaussian_complex(rng, A.cols());
  double est = 0;
  for (std::size_t t = 0; t < iters; ++t) {
    double nx = x.norm();
    if (nx == 0) return 0;
    x /= nx;
    x = A.apply_adjoint(A.apply(x));
    double e = std::sqrt(x.norm());
    if (std::abs(e - est) <= 1e-12 * e) return e;
    est = e;
  }
  return est;
}

// AA* = I up to probing error (partial isometry rows: sampled unitary)
template <LinearMap Op>
bool has_orthonormal_rows(const Op& A) {
  if (A.rows() == 0 || A.rows() > A.cols()) return A.rows() == 0;
  auto rng = make_rng(0x0b5, {A.rows(), A.cols()});
  for (int t = 0; t < 3; ++t) {
    Vec u = gaussian_complex(rng, A.rows());
    if ((A.apply(A.apply_adjoint(u)) - u).norm() > 1e-10 * u.norm()) return false;
  }
  return true;
}

// D*D = I up to probing error
template <LinearMap Op>
bool is_parseval(const Op& D) {
  auto rng = make_rng(0x9a5e, {D.rows(), D.cols()});
  for (int t = 0; t < 3; ++t) {
    Vec u = gaussian_complex(rng, D.cols());
    if ((D.apply_adjoint(D.apply(u)) - u).norm() > 1e-10 * u.norm()) return false;
  }
  return true;
}

// adaptive primal/dual step ratio (residual balancing), tau*sigma fixed at the stable product
struct StepBalancer {
  double tau, sigma, alpha = 0.5;
  static constexpr double eta = 0.95, spread = 1.5;
  explicit StepBalancer(double base) : tau(base), sigma(base) {}
  void update(const Vec& dg, const Vec& Ktdl, const Vec& dl, const Vec& Kdg) {
    double p = (dg / tau - Ktdl).cwiseAbs().sum();
    double d = (dl / sigma - Kdg).cwiseAbs().sum();
    if (p > spread * d) {
      tau /= 1 - alpha;
      sigma *= 1 - alpha;
      alpha *= eta;
    } else if (d > spread * p) {
      tau *= 1 - alpha;
      sigma /= 1 - alpha;
      alpha *= eta;
    }
  }
};

inline Vec project_ball(const Vec& v, const Vec& c, double r) {
  Vec d = v - c;
  double nd = d.norm();
  if (nd <= r) return v;
  if (nd == 0) return c;
  return c + d * (r / nd);
}

inline void clip_box(Vec& lam, double a) {
  for (auto& v : lam) {
    double m = std::abs(v);
    if (m > a) v *= a / m;
  }
}

}  // namespace detail

// min ||Dg||_1 s.t. ||y - P_Omega V g||_2 <= delta, primal-dual hybrid gradient
template <LinearMap VOp, LinearMap DOp>
RecoverySolution solve_constrained(const RecoveryProblem<VOp, DOp>& prob, const SolverOptions& opts = {}) {
  prob.validate();
  require(opts.feas_tol > 0 && opts.opt_tol > 0, ErrorKind::invalid_input, "tolerances must be positive");
  const auto& D = prob.D;
  SampledMap<VOp> A(prob.V, prob.omega);
  const std::size_t n = D.cols();
  const Vec& y = prob.y;
  const double delta = prob.delta;
  const bool ortho = detail::has_orthonormal_rows(A);

  RecoverySolution best;
  double best_obj = inf;
  auto finish = [&](const Vec& g, const Vec& Dg, double res, std::size_t it, bool conv, double gap) {
    RecoverySolution s;
    s.g = Signal(g);
    s.l1 = Dg.cwiseAbs().sum();
    s.objective = s.l1;
    s.residual = res;
    s.iterations = it;
    s.converged = conv;
    s.gap = gap;
    s.stationarity = gap;
    return s;
  };

  if (y.size() == 0 || y.norm() <= delta) {
    Vec g = Vec::Zero(n);
    return finish(g, D.apply(g), y.norm(), 0, true, 0.0);
  }

  if (ortho) {
    // g stays in C = {g : ||Ag - y|| <= delta}, closed-form projection because AA* = I
    auto proj_C = [&](const Vec& g) -> Vec {
      Vec Ag = A.apply(g);
      Vec target = detail::project_ball(Ag, y, delta);
      return g + A.apply_adjoint(target - Ag);
    };
    const double LD = detail::power_norm(D);
    const bool parseval = detail::is_parseval(D);
    detail::StepBalancer steps(0.99 / LD);
    Vec g = proj_C(Vec::Zero(n));
    Vec Dg = D.apply(g);
    Vec lam = Vec::Zero(D.rows());
    Vec Dtl = Vec::Zero(n);
    double prev_obj = Dg.cwiseAbs().sum();
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
      Vec g_new = proj_C(g - steps.tau * Dtl);
      Vec Dg_new = D.apply(g_new);
      Vec lam_new = lam + steps.sigma * (2.0 * Dg_new - Dg);
      detail::clip_box(lam_new, 1.0);
      Vec Dtl_new = D.apply_adjoint(lam_new);
      steps.update(g - g_new, Dtl - Dtl_new, lam - lam_new, Dg - Dg_new);
      g.swap(g_new);
      Dg.swap(Dg_new);
      lam.swap(lam_new);
      Dtl.swap(Dtl_new);
      if (it % opts.window == 0 || it == opts.max_iter) {
        double obj = Dg.cwiseAbs().sum();
        double res = (A.apply(g) - y).norm();
        double scale = std::max(1.0, obj);
        double gap;
        if (parseval) {
          // dual-feasible point: remove the part of D*lam outside R(A*), rescale into the box
          Vec Dtl = D.apply_adjoint(lam);
          Vec r = Dtl - A.apply_adjoint(A.apply(Dtl));
          Vec lam2 = lam - D.apply(r);
          double box = lam2.cwiseAbs().maxCoeff();
          if (box > 1) lam2 /= box;
          Vec nu = A.apply(D.apply_adjoint(lam2));
          double dual = nu.dot(y).real() - delta * nu.norm();
          gap = std::max(0.0, obj - dual);
        } else {
          double comp = std::max(0.0, obj - lam.dot(Dg).real()) / scale;
          double stat = (g - proj_C(g - D.apply_adjoint(lam))).norm() / std::max(1.0, g.norm());
          gap = comp + stat;
        }
        bool feasible = res <= delta + opts.feas_tol;
        if (feasible && obj < best_obj) {
          best_obj = obj;
          best = finish(g, Dg, res, it, false, gap);
        }
        if (feasible && std::abs(obj - prev_obj) / scale < opts.opt_tol && gap <= opts.opt_tol)
          return finish(g, Dg, res, it, true, gap);
        prev_obj = obj;
      }
    }
    if (best_obj < inf) {
      best.iterations = opts.max_iter;
      return best;
    }
    return finish(g, Dg, (A.apply(g) - y).norm(), opts.max_iter, false, inf);
  }

  // general sampling operator: stacked K = [D; A], ball constraint handled in the dual
  struct Stacked {
    const DOp& D;
    const SampledMap<VOp>& A;
    std::size_t rows() const { return D.rows() + A.rows(); }
    std::size_t cols() const { return D.cols(); }
    Vec apply(const Vec& x) const {
      Vec out(rows());
      out << D.apply(x), A.apply(x);
      return out;
    }
    Vec apply_adjoint(const Vec& z) const {
      return D.apply_adjoint(z.head(D.rows())) + A.apply_adjoint(z.tail(A.rows()));
    }
  } K{D, A};
  const double LK = detail::power_norm(K) * 1.01;
  const double tau = 0.99 / LK, sigma = 0.99 / LK;
  Vec g = Vec::Zero(n);
  Vec Dg = D.apply(g), Ag = A.apply(g);
  Vec lam = Vec::Zero(D.rows()), mu = Vec::Zero(A.rows());
  double prev_obj = 0;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Vec g_new = g - tau * (D.apply_adjoint(lam) + A.apply_adjoint(mu));
    Vec Dg_new = D.apply(g_new), Ag_new = A.apply(g_new);
    lam += sigma * (2.0 * Dg_new - Dg);
    detail::clip_box(lam, 1.0);
    Vec v = mu + sigma * (2.0 * Ag_new - Ag);
    mu = v - sigma * detail::project_ball(v / sigma, y, delta);
    g.swap(g_new);
    Dg.swap(Dg_new);
    Ag.swap(Ag_new);
    if (it % opts.window == 0 || it == opts.max_iter) {
      double obj = Dg.cwiseAbs().sum();
      double res = (Ag - y).norm();
      double scale = std::max(1.0, obj);
      double comp = std::max(0.0, obj - lam.dot(Dg).real()) / scale;
      double comp2 = std::abs(mu.dot(Ag - y).real() - delta * mu.norm()) / scale;
      double stat = (D.apply_adjoint(lam) + A.apply_adjoint(mu)).norm() / scale;
      double gap = comp + comp2 + stat;
      bool feasible = res <= delta + opts.feas_tol;
      if (feasible && obj < best_obj) {
        best_obj = obj;
        best = finish(g, Dg, res, it, false, gap);
      }
      if (feasible && std::abs(obj - prev_obj) / scale < opts.opt_tol && gap <= opts.opt_tol)
        return finish(g, Dg, res, it, true, gap);
      prev_obj = obj;
    }
  }
  if (best_obj < inf) {
    best.iterations = opts.max_iter;
    return best;
  }
  return finish(g, Dg, (Ag - y).norm(), opts.max_iter, false, inf);
}

// min alpha ||Dg||_1 + ||P_Omega V g - y||_2^2
template <LinearMap VOp, LinearMap DOp>
RecoverySolution solve_unconstrained(const RecoveryProblem<VOp, DOp>& prob, double alpha,
                                     const SolverOptions& opts = {}) {
  prob.validate();
  require(alpha > 0 && std::isfinite(alpha), ErrorKind::invalid_input, "alpha must be positive");
  const auto& D = prob.D;
  SampledMap<VOp> A(prob.V, prob.omega);
  const std::size_t n = D.cols();
  const Vec& y = prob.y;
  const double LD = detail::power_norm(D);
  const double tau = 0.99 / LD, sigma = 0.99 / LD;
  const bool ortho = detail::has_orthonormal_rows(A);
  const Vec Aty = A.apply_adjoint(y);

  std::optional<Eigen::LLT<Mat>> chol;
  if (!ortho) {
    Mat AtA(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      Vec e = Vec::Zero(n);
      e(j) = 1;
      AtA.col(j) = A.apply_adjoint(A.apply(e));
    }
    chol.emplace(Mat(Mat::Identity(n, n) + 2 * tau * AtA));
  }
  auto prox_G = [&](const Vec& v) -> Vec {
    Vec b = v + 2 * tau * Aty;
    if (ortho) {
      double c = 2 * tau;
      return b - (c / (1 + c)) * A.apply_adjoint(A.apply(b));
    }
    return chol->solve(b);
  };
  auto evaluate = [&](const Vec& g, const Vec& Dg, const Vec& lam, std::size_t it, bool conv) {
    RecoverySolution s;
    Vec r = A.apply(g) - y;
    s.g = Signal(g);
    s.l1 = Dg.cwiseAbs().sum();
    s.residual = r.norm();
    s.objective = alpha * s.l1 + r.squaredNorm();
    Vec grad = 2.0 * A.apply_adjoint(r);
    s.stationarity = (D.apply_adjoint(lam) + grad).cwiseAbs().maxCoeff() / (1.0 + grad.cwiseAbs().maxCoeff());
    double comp = std::max(0.0, alpha * s.l1 - lam.dot(Dg).real()) / std::max(1.0, s.objective);
    s.gap = comp + s.stationarity;
    s.iterations = it;
    s.converged = conv;
    return s;
  };

  Vec g = Vec::Zero(n);
  Vec Dg = D.apply(g);
  Vec lam = Vec::Zero(D.rows());
  double prev_obj = y.squaredNorm();
  RecoverySolution last;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Vec g_new = prox_G(g - tau * D.apply_adjoint(lam));
    Vec Dg_new = D.apply(g_new);
    lam += sigma * (2.0 * Dg_new - Dg);
    detail::clip_box(lam, alpha);
    g.swap(g_new);
    Dg.swap(Dg_new);
    if (it % opts.window == 0 || it == opts.max_iter) {
      last = evaluate(g, Dg, lam, it, false);
      double scale = std::max(1.0, last.objective);
      if (std::abs(last.objective - prev_obj) / scale < opts.opt_tol && last.gap <= opts.opt_tol) {
        last.converged = true;
        return last;
      }
      prev_obj = last.objective;
    }
  }
  return last;
}

inline double relative_error(const Vec& g, const Vec& x) {
  require(g.size() == x.size(), ErrorKind::dimension_mismatch, "relative_error: length mismatch");
  double nx = x.norm();
  require(nx > 0, ErrorKind::undefined_reference, "relative error against the zero vector");
  return 100.0 * (g - x).norm() / nx;
}

inline double relative_error(const Signal& g, const Signal& x) { return relative_error(g.vec(), x.vec()); }

// y = P_Omega V x (+ Gaussian noise of norm delta when a noise seed is given), then the constrained solve
template <LinearMap VOp, LinearMap DOp>
RecoverySolution recover(const Vec& x, const SamplingScheme& scheme, const VOp& V, const DOp& D, double delta,
                         std::optional<std::uint64_t> noise_seed = std::nullopt, const SolverOptions& opts = {}) {
  require(static_cast<std::size_t>(x.size()) == V.cols(), ErrorKind::dimension_mismatch, "signal length vs V");
  SampledMap<VOp> A(V, scheme.omega);
  Vec y = A.apply(x);
  if (noise_seed && delta > 0 && y.size() > 0) {
    auto rng = make_rng(*noise_seed, {0x401e});
    Vec e = gaussian_complex(rng, static_cast<std::size_t>(y.size()));
    y += e * (delta / e.norm());
  }
  RecoveryProblem<VOp, DOp> prob{V, D, scheme.omega, y, delta};
  return solve_constrained(prob, opts);
}

}  // namespace framecs
