#include <gtest/gtest.h>

#include "framecs/certificate.hpp"

using namespace framecs;

namespace {

struct Setup {
  int p;
  std::size_t n;
  Mat V, D;
  LevelPartition M, N;
};

Setup make_setup(int p) {
  std::size_t n = std::size_t(1) << p;
  return {p, n, dft_matrix(n).mat(), haar_frame_redundant(p).mat(), wavelet_levels(p, false), wavelet_levels(p, true)};
}

IndexSet random_delta(std::size_t rows, std::size_t s, std::uint64_t seed) {
  auto rng = make_rng(seed, {0xde});
  auto d = sample_without_replacement(rng, rows, s);
  for (auto& j : d) ++j;
  return IndexSet::from_unsorted(d, rows);
}

Vec signal_on(const Mat& D, const IndexSet& Delta, std::uint64_t seed) {
  auto rng = make_rng(seed, {0xf0});
  Vec x = Vec::Zero(D.rows());
  std::normal_distribution<double> nd;
  for (auto j : Delta.indices()) x(Eigen::Index(j - 1)) = nd(rng);
  return D.adjoint() * x;
}

}  // namespace

TEST(Split, Extremes) {
  auto a = split_densities({0.0}, 5);
  EXPECT_EQ(a.q_tilde[0], 0.0);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(a.q[j][0], 0.0);
  auto b = split_densities({1.0}, 5);
  EXPECT_EQ(b.q[0][0], 0.25);
  EXPECT_EQ(b.q[1][0], 0.25);
  EXPECT_EQ(b.q_tilde[0], 1.0);
  EXPECT_LE(b.max_product_error, 1e-15);
  EXPECT_THROW(split_densities({0.5}, 2), Error);
  EXPECT_THROW(split_densities({1.2}, 5), Error);
}

TEST(Split, ProductIdentity) {
  auto s = split_densities({0.5, 0.9, 0.13}, 10);
  EXPECT_LE(s.max_product_error, 1e-12);
  for (std::size_t k = 0; k < 3; ++k) {
    double prod = 1;
    for (std::size_t j = 0; j < 10; ++j) prod *= 1 - s.q[j][k];
    double q = std::vector<double>{0.5, 0.9, 0.13}[k];
    EXPECT_NEAR(prod, 1 - q, 1e-12);
  }
}

TEST(Scaling, WeightsAndBounds) {
  LevelPartition N({2, 4, 8});
  ScalingOperator T(N, {0.1, 2.0, 8.0}, 8);
  const double r = 3;
  EXPECT_DOUBLE_EQ(T.weights()[0], 1.0);
  EXPECT_NEAR(T.weights()[1], 1 / std::sqrt(r * 2), 1e-15);
  EXPECT_NEAR(T.weights()[2], 1 / std::sqrt(r * 8), 1e-15);
  EXPECT_DOUBLE_EQ(T.kappa_max(), 24.0);
  EXPECT_TRUE(T.bounds_hold());
  Vec z = Vec::Ones(8);
  EXPECT_NEAR((T.apply_inverse(T.apply(z)) - z).norm(), 0.0, 1e-15);
  EXPECT_THROW(ScalingOperator(N, {1.0, 1.0}, 8), Error);
  EXPECT_THROW(ScalingOperator(N, {1.0, -1.0, 1.0}, 8), Error);
  // zero kappa: weight 1, the ||T|| bound is vacuous
  EXPECT_TRUE(ScalingOperator(N, {0.0, 0.0, 4.0}, 8).bounds_hold());
}

TEST(LForms, Formulas) {
  double L = L_theorem(0.1, 0.5, 64, 16);
  EXPECT_NEAR(L, 1 + std::sqrt(std::log2(60.0)) / std::log2(4 * 64 * 4 / 0.5), 1e-14);
  EXPECT_THROW(L_theorem(1.5, 0.5, 64, 16), Error);
  double c = std::sqrt(16.0) * 100 * 3 / 0.5;
  EXPECT_NEAR(L_golfing(2, 0.1, 0.5, 16, 100, 3), std::sqrt(2 * (std::log(8 * c) + std::log(60.0)) / std::log(4 * c)), 1e-14);
}

TEST(Wilson, KnownValues) {
  auto w = wilson_interval(0, 200);
  const double z = 1.959963984540054;
  EXPECT_NEAR(w.lo, 0.0, 1e-15);
  EXPECT_NEAR(w.hi, z * z / (200 + z * z), 1e-14);
  auto v = wilson_interval(5, 20);
  EXPECT_NEAR(v.lo, 0.1118, 1e-4);
  EXPECT_NEAR(v.hi, 0.4687, 1e-4);
  auto u = wilson_interval(20, 20);
  EXPECT_NEAR(u.hi, 1.0, 1e-14);
}

TEST(Verify, ProjectedSignVector) {
  auto S = make_setup(5);
  auto Delta = random_delta(2 * S.n, 5, 1);
  Vec f = signal_on(S.D, Delta, 1);
  auto W = detail::subspace(S.D, Delta);
  Vec sg = detail::restrict_to(sign_vector(Vec(S.D * f)), Delta, false);
  Vec rho = W.Q * (S.D.adjoint() * sg);
  Vec w = S.V * rho;  // full sampling: rho = V* w
  std::vector<IndexSet> om;
  for (std::size_t k = 1; k <= S.M.r(); ++k) om.push_back(S.M.level_set(k, S.n));
  auto v = verify_certificate(S.V, S.D, Delta, f, rho, w, S.M, om, std::vector<double>(S.M.r(), 1.0), 4.0, 2.0);
  EXPECT_LT(v.conditions[0].value, 1e-12);
  EXPECT_LT(v.conditions[2].value, 1e-12);
  EXPECT_TRUE(v.conditions[2].pass);
  EXPECT_LT(v.rho_residual, 1e-12);
  EXPECT_EQ(v.conditions.size(), 5u);
  // the zero certificate leaves the whole sign vector uncovered
  auto z = verify_certificate(S.V, S.D, Delta, f, Vec(Vec::Zero(S.n)), Vec(Vec::Zero(S.n)), S.M, om,
                              std::vector<double>(S.M.r(), 1.0), 4.0, 2.0);
  EXPECT_FALSE(z.conditions[2].pass);
  EXPECT_NEAR(z.conditions[2].value, (S.D.adjoint() * sg).norm(), 1e-12);
  EXPECT_GT(v.error_bound(0.1), v.tail_l1);
}

TEST(Golfing, ZeroSignalDegenerate) {
  auto S = make_setup(4);
  auto Delta = random_delta(2 * S.n, 3, 2);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.8)};
  c.mu = 5;
  c.nu = 2;
  c.kappa = std::vector<double>(S.N.r(), 1.0);
  auto r = golfing_construct(S.V, S.D, Delta, Vec(Vec::Zero(S.n)), c);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.rho.norm(), 0.0);
  EXPECT_EQ(r.w.norm(), 0.0);
  EXPECT_EQ(r.verdict.conditions[2].value, 0.0);
  EXPECT_EQ(r.verdict.conditions[3].value, 0.0);
  EXPECT_EQ(r.verdict.conditions[4].value, 0.0);
  EXPECT_TRUE(r.verdict.conditions[2].pass && r.verdict.conditions[3].pass && r.verdict.conditions[4].pass);
}

TEST(Golfing, NuZeroVacuous) {
  auto S = make_setup(4);
  auto Delta = random_delta(2 * S.n, 3, 3);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.8)};
  c.mu = 4;
  c.nu = 0;
  c.kappa = std::vector<double>(S.N.r(), 1.0);
  auto r = golfing_construct(S.V, S.D, Delta, signal_on(S.D, Delta, 3), c);
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.rho.norm(), 0.0);
  EXPECT_EQ(r.w.norm(), 0.0);
}

TEST(Golfing, FullSamplingContracts) {
  auto S = make_setup(6);
  auto Delta = random_delta(2 * S.n, 4, 4);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 1.0)};
  c.mu = 8;
  c.nu = 3;
  c.seed = 4;
  auto r = golfing_construct(S.V, S.D, Delta, signal_on(S.D, Delta, 4), c);
  EXPECT_TRUE(r.success);
  EXPECT_GE(r.theta.size(), 3u);
  // batches from the third on are full: V* V = I wipes Z in one step
  EXPECT_LT(r.tdz_trace[3], 1e-10 * r.tdz_trace[0]);
  EXPECT_LT(r.verdict.conditions[2].value, 1e-10);
  EXPECT_TRUE(r.verdict.conditions[2].pass);
  EXPECT_LT(r.verdict.conditions[0].value, 0.25);
  EXPECT_TRUE(r.algebra_ok);
  EXPECT_LE(r.rho_residual, 1e-10);
  EXPECT_LE(r.max_identity_error, 1e-9);
  EXPECT_LE(r.w.norm(), r.w_bound * (1 + 1e-12));
  EXPECT_TRUE(r.t_bounds);
}

TEST(Golfing, LogInvariants) {
  auto S = make_setup(5);
  auto Delta = random_delta(2 * S.n, 4, 5);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.7)};
  c.mu = 10;
  c.nu = 3;
  c.seed = 9;
  auto r = golfing_construct(S.V, S.D, Delta, signal_on(S.D, Delta, 5), c);
  ASSERT_EQ(r.log.size(), 10u);
  EXPECT_TRUE(r.log[0].accepted && r.log[1].accepted);
  std::size_t acc = 0;
  for (const auto& st : r.log) {
    if (!st.accepted) continue;
    ++acc;
    EXPECT_LE(st.identity_error, 1e-9);
    if (st.i >= 3) {
      EXPECT_TRUE(st.event_a && st.event_b);
      EXPECT_LE(st.tdz_after, st.alpha * st.tdz * (1 + 1e-12) + 1e-15);
    }
  }
  EXPECT_EQ(acc, r.theta.size());
  EXPECT_EQ(r.success, r.theta.size() >= 3);
  EXPECT_LE(r.rho_residual, 1e-10);
  // union of the batches, per level
  std::size_t tot = 0;
  for (const auto& o : r.omega_levels) tot += o.size();
  EXPECT_EQ(tot, r.omega.size());
}

TEST(Golfing, Deterministic) {
  auto S = make_setup(4);
  auto Delta = random_delta(2 * S.n, 3, 6);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.6)};
  c.mu = 6;
  c.nu = 2;
  c.seed = 1;
  Vec f = signal_on(S.D, Delta, 6);
  auto a = golfing_construct(S.V, S.D, Delta, f, c), b = golfing_construct(S.V, S.D, Delta, f, c);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ((a.rho - b.rho).norm(), 0.0);
  EXPECT_EQ(a.omega, b.omega);
}

TEST(Golfing, DefaultSchedule) {
  auto S = make_setup(4);
  auto Delta = random_delta(2 * S.n, 2, 7);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.9)};
  c.kappa = std::vector<double>(S.N.r(), 1.0);
  c.mtilde = 40.0;
  auto r = golfing_construct(S.V, S.D, Delta, signal_on(S.D, Delta, 7), c);
  double cc = std::sqrt(r.kappa_max) * 40.0 * r.dd_norm / 0.9;
  EXPECT_NEAR(r.nu_raw, std::log(8 * cc), 1e-12);
  EXPECT_EQ(r.nu, std::size_t(std::ceil(r.nu_raw)));
  EXPECT_EQ(r.mu, 8 * std::size_t(std::ceil(3.0 * double(r.nu) + std::log(std::pow(0.1 / 6, -0.5)))));
  EXPECT_NEAR(r.gamma, 0.1 / 6, 1e-15);
  EXPECT_LE(r.split_error, 1e-12);
}

TEST(Golfing, InputValidation) {
  auto S = make_setup(4);
  auto Delta = random_delta(2 * S.n, 2, 8);
  GolfingConfig c{S.M, S.N, std::vector<double>(S.M.r(), 0.0)};
  EXPECT_THROW(golfing_construct(S.V, S.D, Delta, Vec(Vec::Zero(S.n)), c), Error);
  GolfingConfig d{S.M, S.N, {0.5}};
  EXPECT_THROW(golfing_construct(S.V, S.D, Delta, Vec(Vec::Zero(S.n)), d), Error);
  GolfingConfig e{S.M, S.N, std::vector<double>(S.M.r(), 0.5)};
  EXPECT_THROW(golfing_construct(S.V, S.D, IndexSet({1}, 5), Vec(Vec::Zero(S.n)), e), Error);
}

TEST(Concentration, FullSamplingNoEvents) {
  auto S = make_setup(5);
  auto Delta = random_delta(2 * S.n, 4, 9);
  std::vector<double> q(S.M.r(), 1.0);
  for (auto sc : {Scenario::prop1, Scenario::prop3}) {
    auto rep = concentration_check(sc, S.V, S.D, Delta, S.M, S.N, q, 0.25, 30, 1);
    EXPECT_EQ(rep.hits, 0u) << to_string(sc);
    EXPECT_LT(rep.max_statistic, 1e-10);
  }
}

TEST(Concentration, HugeAlphaNoEvents) {
  auto S = make_setup(5);
  auto Delta = random_delta(2 * S.n, 4, 10);
  std::vector<double> q(S.M.r(), 0.3);
  for (auto sc : {Scenario::prop1, Scenario::prop2, Scenario::prop3}) {
    auto rep = concentration_check(sc, S.V, S.D, Delta, S.M, S.N, q, 1e6, 40, 2);
    EXPECT_EQ(rep.hits, 0u) << to_string(sc);
    EXPECT_EQ(rep.frequency, 0.0);
    EXPECT_TRUE(rep.side_holds);
  }
}

TEST(Concentration, DeskScaleProp1) {
  auto S = make_setup(6);
  auto Delta = random_delta(2 * S.n, 4, 11);
  auto rep = concentration_check(Scenario::prop1, S.V, S.D, Delta, S.M, S.N, std::vector<double>(S.M.r(), 0.9), 0.5, 200, 3);
  EXPECT_TRUE(rep.pass) << rep.hits;
  EXPECT_LE(rep.interval.hi, 0.1);
}

TEST(Concentration, ScenarioNames) {
  for (auto sc : {Scenario::prop1, Scenario::prop2, Scenario::prop3, Scenario::prop4})
    EXPECT_EQ(parse_scenario(to_string(sc)), sc);
  EXPECT_THROW(parse_scenario("prop9"), Error);
}

TEST(Suite, SmallRunAlgebra) {
  SuiteOptions o;
  o.p = 4;
  o.s = 3;
  o.trials = 6;
  o.mu = 3;
  o.nu = 3;
  o.seed = 5;
  auto sum = certificate_suite(o);
  EXPECT_EQ(sum.trials.size(), 6u);
  EXPECT_EQ(sum.algebra_ok, 6u);
  EXPECT_EQ(sum.accepted_steps_ok, sum.accepted_steps);
  auto j = to_json(sum.trials[0].result);
  EXPECT_TRUE(j.contains("log"));
}
