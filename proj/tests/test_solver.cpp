#include <gtest/gtest.h>

#include "framecs/sampling.hpp"
#include "framecs/signals.hpp"
#include "framecs/solver.hpp"
#include "framecs/transforms.hpp"
#include "oracles/simplex.hpp"

using namespace framecs;

namespace {

// random orthogonal V (n x n), m sampled rows, x with a few jumps
struct Instance {
  Mat V;
  IndexSet omega;
  Vec x;
};

Instance make_instance(std::uint64_t seed, std::size_t n, std::size_t m) {
  auto rng = make_rng(seed, {0x50});
  Eigen::MatrixXd G(n, n);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  auto rows = sample_without_replacement(rng, n, m);
  for (auto& r : rows) ++r;
  RVec x = random_piecewise_constant(n, 3, rng);
  return {Q.cast<cplx>(), IndexSet::from_unsorted(rows, n), x.cast<cplx>()};
}

double oracle_value(const Mat& D, const Mat& V, const IndexSet& omega, const Vec& x) {
  Mat A = V(omega.zero_based(), Eigen::all);
  auto r = oracle::analysis_l1(D.real(), A.real(), (A * x).real());
  EXPECT_TRUE(r.feasible && r.bounded);
  return r.value;
}

}  // namespace

TEST(Solver, MatchesLpOracle) {
  const Mat D = haar_frame_redundant(4).mat();
  DenseOperator Dop(D);
  for (std::uint64_t s = 0; s < 12; ++s) {
    auto in = make_instance(s, 16, 8);
    DenseOperator Vop(in.V);
    SolverOptions o;
    o.opt_tol = 1e-10;
    o.feas_tol = 1e-10;
    auto sol = solve_constrained(RecoveryProblem<DenseOperator, DenseOperator>{Vop, Dop, in.omega,
                                                                              Vec(in.V(in.omega.zero_based(), Eigen::all) * in.x), 0.0},
                                 o);
    double ref = oracle_value(D, in.V, in.omega, in.x);
    EXPECT_NEAR(sol.objective, ref, 1e-6 * std::max(1.0, ref)) << "seed " << s;
    EXPECT_LE(sol.residual, 1e-8);
  }
}

TEST(Solver, GeneralSamplingPathMatchesOracle) {
  // rows of a random Gaussian V are not orthonormal: stacked primal-dual path
  const Mat D = haar_frame_redundant(3).mat();
  DenseOperator Dop(D);
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto rng = make_rng(s, {0x51});
    Eigen::MatrixXd G(8, 8);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
    Mat V = G.cast<cplx>();
    IndexSet omega({1, 3, 4, 7}, 8);
    Vec x = random_piecewise_constant(8, 2, rng).cast<cplx>();
    DenseOperator Vop(V);
    SolverOptions o;
    o.opt_tol = 1e-10;
    o.feas_tol = 1e-9;
    o.max_iter = 400000;
    auto sol = solve_constrained(
        RecoveryProblem<DenseOperator, DenseOperator>{Vop, Dop, omega, Vec(V(omega.zero_based(), Eigen::all) * x), 0.0}, o);
    double ref = oracle_value(D, V, omega, x);
    EXPECT_NEAR(sol.objective, ref, 1e-5 * std::max(1.0, ref)) << "seed " << s;
  }
}

TEST(Solver, FullSamplingRecoversExactly) {
  const int p = 5;
  const std::size_t n = 32;
  FastDft V(n);
  FastHaar D(p, true);
  auto rng = make_rng(3, {0});
  Vec x = random_piecewise_constant(n, 4, rng).cast<cplx>();
  auto scheme = named_scheme(SchemeKind::uniform, n, 0, n, 1);
  auto sol = recover(x, scheme, V, D, 0.0);
  EXPECT_LT(relative_error(sol.g.vec(), x), 1e-4);
  EXPECT_TRUE(sol.converged);
}

TEST(Solver, ZeroMeasurementsGiveZero) {
  FastDft V(16);
  FastHaar D(4, true);
  Vec y = Vec::Zero(3);
  RecoveryProblem<FastDft, FastHaar> prob{V, D, IndexSet({1, 2, 3}, 16), y, 0.0};
  auto sol = solve_constrained(prob);
  EXPECT_EQ(sol.g.vec().norm(), 0.0);
  EXPECT_TRUE(sol.converged);
  // ||y|| <= delta: zero is feasible and optimal
  Vec y2 = Vec::Constant(3, cplx(0.1, 0));
  RecoveryProblem<FastDft, FastHaar> prob2{V, D, IndexSet({1, 2, 3}, 16), y2, 1.0};
  EXPECT_EQ(solve_constrained(prob2).objective, 0.0);
}

TEST(Solver, NoisyConstraintFeasible) {
  const std::size_t n = 64;
  FastDft V(n);
  FastHaar D(6, true);
  auto rng = make_rng(9, {0});
  Vec x = random_piecewise_constant(n, 5, rng).cast<cplx>();
  auto scheme = named_scheme(SchemeKind::half_half, 32, 12, n, 4);
  const double delta = 1e-2;
  auto sol = recover(x, scheme, V, D, delta, 77);
  EXPECT_LE(sol.residual, delta + 1e-6);
  // x itself is feasible, so the optimum cannot exceed ||Dx||_1 by more than the tolerance
  EXPECT_LE(sol.objective, D.apply(x).cwiseAbs().sum() * (1 + 1e-4) + 1e-6);
}

TEST(Solver, UnconstrainedStationary) {
  const std::size_t n = 32;
  FastDft V(n);
  FastHaar D(5, true);
  auto rng = make_rng(5, {0});
  Vec x = random_piecewise_constant(n, 3, rng).cast<cplx>();
  IndexSet omega = named_scheme(SchemeKind::half_half, 16, 6, n, 2).omega;
  SampledMap<FastDft> A(V, omega);
  RecoveryProblem<FastDft, FastHaar> prob{V, D, omega, A.apply(x), 0.0};
  SolverOptions o;
  o.opt_tol = 1e-9;
  auto sol = solve_unconstrained(prob, 0.05, o);
  EXPECT_TRUE(sol.converged);
  EXPECT_LT(sol.stationarity, 1e-6);
  // objective no worse than at the truth
  double at_truth = 0.05 * D.apply(x).cwiseAbs().sum();
  EXPECT_LE(sol.objective, at_truth + 1e-8);
  EXPECT_THROW(solve_unconstrained(prob, 0.0), Error);
}

TEST(Solver, Validation) {
  FastDft V(16);
  FastHaar D(4, true);
  RecoveryProblem<FastDft, FastHaar> bad{V, D, IndexSet({1, 2}, 16), Vec::Zero(3), 0.0};
  EXPECT_THROW(solve_constrained(bad), Error);
  RecoveryProblem<FastDft, FastHaar> neg{V, D, IndexSet({1, 2}, 16), Vec::Zero(2), -1.0};
  EXPECT_THROW(solve_constrained(neg), Error);
  EXPECT_THROW(relative_error(Vec(Vec::Zero(2)), Vec(Vec::Zero(2))), Error);
}

TEST(Solver, RelativeErrorPercent) {
  Vec x(2), g(2);
  x << 3.0, 4.0;
  g << 3.0, 4.5;
  EXPECT_DOUBLE_EQ(relative_error(g, x), 10.0);
}
