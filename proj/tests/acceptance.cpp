// acceptance runner: one PASS/FAIL line per criterion
//   acceptance [--only 1,2,...] [--known-blocked 9,...]
// exit status is 0 when the failing set equals the known-blocked set

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "framecs/certificate.hpp"
#include "framecs/diagnostics.hpp"
#include "framecs/experiments.hpp"
#include "framecs/signals.hpp"
#include "framecs/solver.hpp"
#include "framecs/transforms.hpp"
#include "oracles/simplex.hpp"

using namespace framecs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double row_sum_norm(const Eigen::MatrixXd& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

// 1
Outcome parseval_suite() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0, worst_inf = 0;
  for (int p = 1; p <= 10; ++p) {
    const auto n = Eigen::Index(1) << p;
    std::vector<Eigen::MatrixXd> ops{haar_orthobasis(p).mat().real(), haar_frame_redundant(p).mat().real(),
                                     materialize(FastHaar(p, true)).real()};
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const auto& D = ops[i];
      Eigen::MatrixXd G = D.transpose() * D - Eigen::MatrixXd::Identity(n, n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
      worst = std::max(worst, es.eigenvalues().cwiseAbs().maxCoeff());
      if (i > 0) worst_inf = std::max(worst_inf, row_sum_norm(D * D.transpose()));
    }
  }
  double t = seconds_since(t0);
  const double bound = 2 / (std::sqrt(2.0) - 1);
  bool ok = worst <= 1e-10 && worst_inf <= bound && t < 30;
  return {ok, "max ||D*D-I|| = " + num(worst) + ", max ||DD*||_inf = " + num(worst_inf) + " <= " + num(bound) +
                  ", " + num(t) + " s"};
}

// 2
Outcome coherence_suite() {
  double worst = 0;
  for (std::size_t n : {8u, 64u, 512u}) {
    double mu = coherence(dft_matrix(n).mat()).mu;
    worst = std::max(worst, std::abs(mu - 1 / std::sqrt(double(n))));
  }
  return {worst <= 1e-12, "max |mu - N^-1/2| = " + num(worst)};
}

// 3
Outcome orthonormal_collapse() {
  double err = 0;
  for (int p : {4, 6}) {
    DenseOperator D = haar_orthobasis(p);
    auto N = wavelet_levels(p, false);
    std::vector<std::size_t> s;
    for (std::size_t k = 1; k <= N.r(); ++k) s.push_back(std::min<std::size_t>(N.size(k), k));
    auto e = kappa_localized(D, N, s, 1.0, 40, 7);
    for (std::size_t k = 0; k < s.size(); ++k) err = std::max(err, std::abs(e.levels[k] - double(s[k])));
    const std::size_t n = std::size_t(1) << p;
    for (const auto& d : sample_supports(n, 5, 10, 3)) err = std::max(err, std::abs(b_tilde(D.mat(), N, d).value - 1.0));
    std::vector<double> kap;
    for (std::size_t k = 1; k <= N.r(); ++k) kap.push_back(double(k % 3 + 1));
    auto rs = relative_sparsity(D.mat(), D.mat(), N, N, kap, 4, 1);
    for (std::size_t k = 0; k < kap.size(); ++k) err = std::max(err, std::abs(rs.estimate[k] - kap[k]));
  }
  return {err <= 1e-6, "max deviation = " + num(err)};
}

// 4
Outcome norm_lemmas() {
  const double ps[] = {1.0, 0.5, 0.25};
  std::size_t fails = 0, checks = 0;
  auto rng = make_rng(52, {0});
  for (int t = 0; t < 10000; ++t) {
    std::size_t n = 1 + rng() % 40, s = 1 + rng() % n;
    Vec x = Vec::Zero(Eigen::Index(n));
    auto idx = sample_without_replacement(rng, n, s);
    Vec g = gaussian_complex(rng, s);
    for (std::size_t i = 0; i < s; ++i) x(Eigen::Index(idx[i])) = g(Eigen::Index(i));
    double p = ps[t % 3];
    for (double q : {2.0, inf}) {
      Vec u = x / lp_norm(x, q);
      double lhs = std::pow(lp_norm(u, p), p);
      double rhs = q == inf ? double(s) : std::pow(double(s), 1 - p / q);
      fails += lhs > rhs * (1 + 1e-9) + 1e-9;
      ++checks;
    }
  }
  auto rng2 = make_rng(53, {0});
  for (int t = 0; t < 10000; ++t) {
    std::size_t n = 1 + rng2() % 50;
    Vec x = gaussian_complex(rng2, n);
    double rate = 0.02 * double(t % 50);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) *= std::exp(-rate * double(i));
    double k = vector_kappa(x, ps[t % 3]).value();
    double l1 = x.cwiseAbs().sum(), l2 = x.norm(), li = x.cwiseAbs().maxCoeff();
    fails += l1 > k * li * (1 + 1e-9) + 1e-9;
    fails += l2 * l2 > k * li * li * (1 + 1e-9) + 1e-9;
    fails += l1 * l1 > k * l2 * l2 * (1 + 1e-9) + 1e-9;
    checks += 3;
  }
  return {fails == 0, std::to_string(fails) + " failures in " + std::to_string(checks) + " checks"};
}

// 5
Outcome solver_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 16, m = 8;
  const Mat D = haar_frame_redundant(4).mat();
  DenseOperator Dop(D);
  std::size_t fails = 0;
  double worst = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto rng = make_rng(s, {0x50});
    Eigen::MatrixXd G(n, n);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    auto rows = sample_without_replacement(rng, n, m);
    for (auto& r : rows) ++r;
    IndexSet omega = IndexSet::from_unsorted(rows, n);
    Vec x = random_piecewise_constant(n, 3, rng).cast<cplx>();
    Mat V = Q.cast<cplx>();
    Mat A = V(omega.zero_based(), Eigen::all);
    Vec y = A * x;
    DenseOperator Vop(V);
    SolverOptions o;
    o.opt_tol = 1e-10;
    o.feas_tol = 1e-10;
    auto sol = solve_constrained(RecoveryProblem<DenseOperator, DenseOperator>{Vop, Dop, omega, y, 0.0}, o);
    auto ref = oracle::analysis_l1(D.real(), A.real(), y.real());
    double gap = std::abs(sol.objective - ref.value) / std::max(1.0, ref.value);
    worst = std::max(worst, gap);
    fails += !(ref.feasible && ref.bounded) || gap > 1e-6;
  }
  double t = seconds_since(t0);
  return {fails == 0 && t < 300,
          std::to_string(fails) + "/50 mismatches, max rel gap = " + num(worst) + ", " + num(t) + " s"};
}

// 6
Outcome fig2() {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.id = "fig2";
  auto rep = run_fig2(c);
  double t = seconds_since(t0);
  std::string d;
  for (const auto& a : rep.assertions) d += a.name + ": " + a.detail + "; ";
  return {rep.all_pass() && t < 1200, d + num(t) + " s"};
}

// 7
Outcome sandwich() {
  const int p = 5;
  Mat V = dft_matrix(32).mat(), D = haar_frame_redundant(p).mat();
  auto M = wavelet_levels(p, false), N = wavelet_levels(p, true);
  const std::vector<std::vector<double>> profiles{{4, 4, 4, 4, 4}, {4, 3, 2, 1, 0.5}, {0.5, 1, 2, 6, 10}};
  auto bn = block_norms(V, D, M, N);
  std::size_t bad = 0;
  for (const auto& kap : profiles) {
    auto rs = relative_sparsity(V, D, M, N, kap, 4, 11);
    for (std::size_t k = 0; k < M.r(); ++k) {
      double lemma = 0;
      for (std::size_t l = 0; l < N.r(); ++l) lemma += bn.omega(Eigen::Index(k), Eigen::Index(l)) * kap[l];
      bad += rs.estimate[k] > bn.C * lemma * (1 + 1e-9);
    }
    bad += !rs.below_bounds();
  }
  return {bad == 0, std::to_string(bad) + " violations over 3 profiles"};
}

// 8
Outcome sn_oracle() {
  auto rng = make_rng(8, {0});
  std::uniform_int_distribution<int> lev(1, 3), sz(1, 6), val(-24, 24);
  std::size_t bad = 0;
  for (int t = 0; t < 200; ++t) {
    int r = lev(rng);
    std::vector<std::size_t> b, s;
    std::size_t n = 0;
    for (int k = 0; k < r; ++k) {
      std::size_t m = std::size_t(sz(rng));
      n += m;
      b.push_back(n);
      s.push_back(std::uniform_int_distribution<std::size_t>(0, m)(rng));
    }
    LevelPartition N(b);
    Vec x = Vec::Zero(static_cast<Eigen::Index>(n));
    const int trip[][2] = {{3, 4}, {5, 12}, {8, 15}, {7, 24}};
    for (auto& v : x) {
      int a = val(rng);
      if (t % 3 == 0 && a % 2 == 0) v = cplx(trip[std::abs(a) % 4][0], trip[std::abs(a) % 4][1]) * (a / 8.0);
      else v = cplx(a / 8.0, 0.0);
    }
    double best = inf;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::size_t> cnt(r, 0);
      double tail = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1) ++cnt[N.level_of(i + 1) - 1];
        else tail += std::abs(x(Eigen::Index(i)));
      }
      bool ok = true;
      for (int k = 0; k < r; ++k) ok = ok && cnt[k] <= s[k];
      if (ok) best = std::min(best, tail);
    }
    bad += sN_term_approx(x, s, N) != best;
  }
  return {bad == 0, std::to_string(bad) + "/200 mismatches"};
}

// 9
Outcome certificates() {
  auto t0 = std::chrono::steady_clock::now();
  SuiteOptions o;
  o.p = 6;
  o.s = 4;
  o.q = 0.9;
  o.trials = 50;
  o.mu = 3;
  o.nu = 3;
  auto sum = certificate_suite(o);
  double t = seconds_since(t0);
  std::ostringstream d;
  d << "certified " << sum.certified << "/50 (golfing success " << sum.succeeded << "); conditions (i)-(v) pass";
  for (auto c : sum.condition_passes) d << " " << c;
  d << "; accepted-step algebra " << sum.accepted_steps_ok << "/" << sum.accepted_steps << ", trial algebra "
    << sum.algebra_ok << "/50; " << num(t) << " s";
  bool ok = sum.certified >= 45 && sum.accepted_steps_ok == sum.accepted_steps && sum.algebra_ok == 50 && t < 600;
  return {ok, d.str()};
}

// 10
Outcome balancing() {
  const int p = 5;
  Mat V = dft_matrix(32).mat(), D = haar_frame_redundant(p).mat();
  auto deltas = sample_supports(64, 4, 10, 1);
  auto full = balancing_residuals(V, D, 32, 64, 4, 4, 4, 1, deltas);
  auto m1 = minimal_balancing_M(V, D, 4, 4, 1, sample_supports(64, 4, 8, 3));
  auto m2 = minimal_balancing_M(V, D, 4, 4, 1, sample_supports(64, 4, 8, 3));
  bool ok = full.lhs1 == 0.0 && m1.has_value() && m1 == m2;
  return {ok, "full-range LHS1 = " + num(full.lhs1) + ", minimal M = " + (m1 ? std::to_string(*m1) : "none") + " / " +
                  (m2 ? std::to_string(*m2) : "none")};
}

// 11
Outcome e_and_kappa() {
  ExperimentConfig c3;
  c3.id = "fig3";
  auto t0 = std::chrono::steady_clock::now();
  auto a = run_fig3(c3);
  double t = seconds_since(t0);
  auto b = run_fig3(c3);
  ExperimentConfig c4;
  c4.id = "fig4";
  auto f1 = run_fig4(c4), f2 = run_fig4(c4);
  bool same = a.csv == b.csv && f1.csv == f2.csv;
  double corr = f1.extra.at("correlation").get<double>();
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  bool ok = same && a.all_pass() && corr > 0.5 && t < 600;
  return {ok, std::string("CSVs ") + (same ? "identical" : "differ") + ", E(p) p=4..10 x 1000 in " + num(t) + " s on " +
                  std::to_string(hw) + " core(s), fig4 correlation = " + num(corr)};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, blocked;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string k = argv[i];
    if (k == "--only") only = parse_list(argv[i + 1]);
    else if (k == "--known-blocked") blocked = parse_list(argv[i + 1]);
    else {
      std::fprintf(stderr, "unknown option %s\n", argv[i]);
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> all{
      {"Parseval/frame suite", parseval_suite},
      {"DFT coherence", coherence_suite},
      {"orthonormal collapse", orthonormal_collapse},
      {"norm lemmas", norm_lemmas},
      {"solver vs LP oracle", solver_oracle},
      {"Figure-2 orderings", fig2},
      {"relative-sparsity sandwich", sandwich},
      {"sN exhaustive oracle", sn_oracle},
      {"certificate suite", certificates},
      {"balancing sanity", balancing},
      {"E(p) and kappa-tilde experiments", e_and_kappa},
  };
  std::set<int> failed;
  for (std::size_t i = 0; i < all.size(); ++i) {
    int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(id);
    std::printf("criterion %2d %s: %s (%s) [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", all[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::set<int> unexpected, fixed;
  for (int f : failed)
    if (!blocked.count(f)) unexpected.insert(f);
  for (int b : blocked)
    if (!failed.count(b) && (only.empty() || only.count(b))) fixed.insert(b);
  std::printf("%zu failing", failed.size());
  for (int f : failed) std::printf(" %d%s", f, blocked.count(f) ? " (known blocked)" : "");
  std::printf("\n");
  for (int f : fixed) std::printf("criterion %d listed as blocked but passed\n", f);
  return unexpected.empty() ? 0 : 1;
}
