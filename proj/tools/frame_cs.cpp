#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "framecs/certificate.hpp"
#include "framecs/diagnostics.hpp"
#include "framecs/experiments.hpp"
#include "framecs/io.hpp"
#include "framecs/sampling.hpp"
#include "framecs/signals.hpp"
#include "framecs/solver.hpp"
#include "framecs/transforms.hpp"

using namespace framecs;
using nlohmann::json;

namespace {

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) v.push_back(static_cast<std::size_t>(std::stoull(tok)));
  return v;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) v.push_back(std::stod(tok));
  return v;
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  require(bool(f), ErrorKind::io, "cannot write " + out);
  f << j.dump(2) << "\n";
}

// "random:S" (seeded), "list:i,j,..." (1-based frame rows) or "signal:file.csv" (support of D x)
IndexSet parse_delta(const std::string& spec, const Mat& D, std::uint64_t seed) {
  auto colon = spec.find(':');
  require(colon != std::string::npos, ErrorKind::invalid_input, "delta spec must be kind:value");
  std::string kind = spec.substr(0, colon), val = spec.substr(colon + 1);
  const std::size_t rows = static_cast<std::size_t>(D.rows());
  if (kind == "random") {
    auto rng = make_rng(seed, {0xde});
    auto d = sample_without_replacement(rng, rows, std::stoull(val));
    for (auto& x : d) x += 1;
    return IndexSet(d, rows);
  }
  if (kind == "list") return IndexSet::from_unsorted(parse_list(val), rows);
  if (kind == "signal") return analysis_support(D * io::load_signal_csv(val).vec());
  fail(ErrorKind::invalid_input, "unknown delta spec '" + kind + "'");
}

json vec_json(const std::vector<double>& v) { return json(v); }

json rmat_json(const RMat& A) {
  json j = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    std::vector<double> row(A.cols());
    for (Eigen::Index k = 0; k < A.cols(); ++k) row[k] = A(i, k);
    j.push_back(row);
  }
  return j;
}

struct Common {
  int p = 6;
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* c, Common& o) {
  c->add_option("--p", o.p, "log2 of the signal length")->check(CLI::Range(1, 20));
  c->add_option("--seed", o.seed, "root seed");
  c->add_option("--out", o.out, "output file");
}

int run_report(const ExperimentConfig& cfg, const std::string& out) {
  auto rep = run_experiment(cfg);
  write_report(rep, out.empty() ? cfg.output : out);
  for (const auto& a : rep.assertions)
    std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << " (" << a.detail << ")\n";
  return rep.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frame-cs: structured compressed sensing with tight frames"};
  app.require_subcommand(1);
  int code = 0;

  // transforms
  Common tr;
  std::string tr_kind = "haar-frame2", tr_format = "csv";
  auto* c_tr = app.add_subcommand("transforms", "dump a transform matrix");
  add_common(c_tr, tr);
  c_tr->add_option("--kind", tr_kind, "dft | haar | haar-frame2");
  c_tr->add_option("--format", tr_format, "csv | bin")->check(CLI::IsMember({"csv", "bin"}));
  c_tr->callback([&] {
    FrameSpec spec{parse_transform_kind(tr_kind), tr.p};
    Mat A = make_operator(spec).mat();
    if (tr.out.empty()) {
      io::write_csv(std::cout, A);
    } else if (tr_format == "csv") {
      io::save_csv(tr.out, A);
    } else {
      io::save_binary(tr.out, A);
    }
  });

  // sample
  Common sa;
  std::string sa_kind = "multilevel", sa_levels, sa_counts, sa_q;
  std::size_t sa_budget = 0, sa_nlow = 0;
  auto* c_sa = app.add_subcommand("sample", "draw a sampling scheme");
  add_common(c_sa, sa);
  c_sa->add_option("--kind", sa_kind, "multilevel | bernoulli | half_half | uniform | lowest");
  c_sa->add_option("--levels", sa_levels, "level boundaries, comma separated");
  c_sa->add_option("--counts", sa_counts, "samples per level");
  c_sa->add_option("--q", sa_q, "Bernoulli densities per level (overrides --counts)");
  c_sa->add_option("--budget", sa_budget, "total budget for named schemes");
  c_sa->add_option("--n-low", sa_nlow, "fully sampled low band for half_half");
  c_sa->callback([&] {
    auto kind = parse_scheme_kind(sa_kind);
    const std::size_t n = std::size_t(1) << sa.p;
    SamplingScheme s;
    if (kind == SchemeKind::half_half || kind == SchemeKind::uniform || kind == SchemeKind::lowest) {
      s = named_scheme(kind, sa_budget, sa_nlow, n, sa.seed);
    } else {
      auto b = sa_levels.empty() ? wavelet_levels(sa.p, false).boundaries() : parse_list(sa_levels);
      if (!sa_q.empty()) {
        s = bernoulli_scheme_q(LevelPartition(b), parse_doubles(sa_q), sa.seed);
      } else {
        LevelStructure L(b, parse_list(sa_counts));
        s = kind == SchemeKind::bernoulli ? bernoulli_scheme(L, sa.seed) : multilevel_scheme(L, sa.seed);
      }
    }
    emit(to_json(s), sa.out);
  });

  // recover
  Common re;
  std::string re_signal, re_scheme, re_generate = "coarse", re_out_signal;
  double re_delta = 0;
  std::optional<std::uint64_t> re_noise;
  std::size_t re_iter = 20000, re_sparsity = 100;
  auto* c_re = app.add_subcommand("recover", "sample a signal and solve the analysis-l1 problem");
  add_common(c_re, re);
  c_re->add_option("--signal", re_signal, "signal CSV (otherwise generated)");
  c_re->add_option("--generate", re_generate, "coarse | window");
  c_re->add_option("--sparsity", re_sparsity, "analysis sparsity of generated signals");
  c_re->add_option("--scheme", re_scheme, "scheme JSON from `sample`")->required();
  c_re->add_option("--delta", re_delta, "noise level");
  c_re->add_option("--noise-seed", re_noise, "seed of the Gaussian noise");
  c_re->add_option("--max-iter", re_iter, "iteration cap");
  c_re->add_option("--save", re_out_signal, "write the recovered signal as CSV");
  c_re->callback([&] {
    const std::size_t n = std::size_t(1) << re.p;
    std::ifstream in(re_scheme);
    require(bool(in), ErrorKind::io, "cannot open " + re_scheme);
    json sj;
    in >> sj;
    auto sch = scheme_from_json(sj);
    Vec x = re_signal.empty()
                ? Vec((re_generate == "window" ? windowed_signal(re.p, n / 10 + 1, n / 10 + n / 16, re_sparsity, re.seed)
                                               : coarse_heavy_signal(re.p, re_sparsity, re.seed))
                          .x.cast<cplx>())
                : io::load_signal_csv(re_signal).vec();
    require(static_cast<std::size_t>(x.size()) == n, ErrorKind::dimension_mismatch, "signal length is not 2^p");
    SolverOptions o;
    o.max_iter = re_iter;
    auto sol = recover(x, sch, FastDft(n), FastHaar(re.p, true), re_delta, re_noise, o);
    if (!re_out_signal.empty()) io::save_signal_csv(re_out_signal, sol.g.vec());
    emit({{"rel_error_pct", relative_error(sol.g.vec(), x)},
          {"objective", sol.objective},
          {"residual", sol.residual},
          {"iterations", sol.iterations},
          {"converged", sol.converged},
          {"gap", sol.gap}},
         re.out);
  });

  // coherence / local coherence
  Common co;
  std::string co_D = "haar-frame2";
  auto* c_co = app.add_subcommand("coherence", "coherence of DFT rows against D");
  add_common(c_co, co);
  c_co->add_option("--sparsifier", co_D, "identity | haar | haar-frame2");
  c_co->callback([&] {
    const std::size_t n = std::size_t(1) << co.p;
    Mat V = dft_matrix(n).mat();
    Mat U = co_D == "identity" ? V : Mat(V * make_operator({parse_transform_kind(co_D), co.p}).mat().adjoint());
    auto r = coherence(U);
    emit({{"mu", r.mu}, {"unit_columns", r.unit_columns}, {"max_column_deviation", r.max_column_deviation}}, co.out);
  });

  Common lc;
  std::string lc_M;
  auto* c_lc = app.add_subcommand("local-coherence", "local coherences mu(k,l) of DFT vs the Haar frame");
  add_common(c_lc, lc);
  c_lc->add_option("--levels", lc_M, "sampling level boundaries (dyadic by default)");
  c_lc->callback([&] {
    const std::size_t n = std::size_t(1) << lc.p;
    LevelPartition M = lc_M.empty() ? wavelet_levels(lc.p, false) : LevelPartition(parse_list(lc_M));
    auto r = local_coherence(dft_matrix(n).mat(), haar_frame_redundant(lc.p).mat(), M, wavelet_levels(lc.p, true));
    emit({{"mu", rmat_json(r.mu)}, {"block", rmat_json(r.block)}, {"truncated", r.truncated}}, lc.out);
  });

  // kappa
  Common ka;
  std::string ka_s;
  std::size_t ka_trials = 200;
  double ka_pexp = 1;
  bool ka_basis = false;
  auto* c_ka = app.add_subcommand("kappa", "Monte Carlo localized level sparsities");
  add_common(c_ka, ka);
  c_ka->add_option("--s", ka_s, "sparsity per level")->required();
  c_ka->add_option("--trials", ka_trials, "random supports");
  c_ka->add_option("--exponent", ka_pexp, "quasi-norm exponent p in (0,1]");
  c_ka->add_flag("--basis", ka_basis, "orthonormal Haar instead of the redundant frame");
  c_ka->callback([&] {
    FastHaar D(ka.p, !ka_basis);
    auto e = kappa_localized(D, wavelet_levels(ka.p, !ka_basis), parse_list(ka_s), ka_pexp, ka_trials, ka.seed);
    json j{{"levels", e.levels}, {"levels_inf", e.levels_inf}, {"levels_2", e.levels_2}, {"global", e.global},
           {"kappa_max", e.kappa_max()}, {"trials", e.trials}, {"seed", e.seed}, {"lower_bound", true}};
    if (e.eta) j["eta"] = *e.eta;
    emit(j, ka.out);
  });

  // B(s,N)
  Common bs;
  std::string bs_s;
  std::size_t bs_trials = 100;
  bool bs_exh = false;
  auto* c_bs = app.add_subcommand("bsn", "B(s,N) for the redundant Haar frame");
  add_common(c_bs, bs);
  c_bs->add_option("--s", bs_s, "sparsity per level")->required();
  c_bs->add_option("--trials", bs_trials, "sampled supports");
  c_bs->add_flag("--exhaustive", bs_exh, "enumerate every support");
  c_bs->callback([&] {
    auto ev = BTildeEvaluator::haar_frame(bs.p);
    auto r = b_sn(ev, wavelet_levels(bs.p, true), parse_list(bs_s), bs_trials, bs.seed, bs_exh);
    emit({{"B", r.value}, {"worst", r.worst.indices()}, {"evaluated", r.evaluated}, {"exhaustive", r.exhaustive}},
         bs.out);
  });

  // balancing
  Common ba;
  std::size_t ba_M = 0, ba_N = 0, ba_s = 4, ba_trials = 20;
  double ba_k1 = 1, ba_k2 = 4, ba_K = 1;
  bool ba_sweep = false;
  auto* c_ba = app.add_subcommand("balancing", "balancing-property residuals");
  add_common(c_ba, ba);
  c_ba->add_option("--M", ba_M, "sampling bandwidth (default all rows)");
  c_ba->add_option("--N", ba_N, "sparsity bandwidth (default all frame rows)");
  c_ba->add_option("--s", ba_s, "support size");
  c_ba->add_option("--kappa1", ba_k1);
  c_ba->add_option("--kappa2", ba_k2);
  c_ba->add_option("--K", ba_K);
  c_ba->add_option("--trials", ba_trials, "random supports");
  c_ba->add_flag("--sweep", ba_sweep, "report the minimal passing M");
  c_ba->callback([&] {
    const std::size_t n = std::size_t(1) << ba.p;
    Mat V = dft_matrix(n).mat(), D = haar_frame_redundant(ba.p).mat();
    std::size_t M = ba_M ? ba_M : n, N = ba_N ? ba_N : 2 * n;
    auto deltas = sample_supports(N, ba_s, ba_trials, ba.seed);
    auto r = balancing_residuals(V, D, M, N, ba_s, ba_k1, ba_k2, ba_K, deltas);
    json j{{"M", r.M}, {"lhs1", r.lhs1}, {"threshold1", r.threshold1}, {"lhs2", r.lhs2}, {"threshold2", r.threshold2},
           {"pass1", r.pass1}, {"pass2", r.pass2}};
    if (ba_sweep) {
      auto m = minimal_balancing_M(V, D, ba_k1, ba_k2, ba_K, deltas);
      j["minimal_M"] = m ? json(*m) : json(nullptr);
    }
    emit(j, ba.out);
  });

  // theorem-check
  Common th;
  std::string th_counts, th_s, th_M;
  double th_eps = 0.1, th_C = 1;
  auto* c_th = app.add_subcommand("theorem-check", "evaluate the main theorem's conditions");
  add_common(c_th, th);
  c_th->add_option("--levels", th_M, "sampling level boundaries (dyadic by default)");
  c_th->add_option("--counts", th_counts, "samples per level")->required();
  c_th->add_option("--s", th_s, "sparsity per level")->required();
  c_th->add_option("--epsilon", th_eps);
  c_th->add_option("--C", th_C, "user constant");
  c_th->callback([&] {
    const std::size_t n = std::size_t(1) << th.p;
    LevelPartition M = th_M.empty() ? wavelet_levels(th.p, false) : LevelPartition(parse_list(th_M));
    TheoremInputs in;
    in.s = parse_list(th_s);
    in.epsilon = th_eps;
    in.C_user = th_C;
    in.seed = th.seed;
    auto r = check_theorem_conditions(dft_matrix(n).mat(), haar_frame_redundant(th.p).mat(), M, parse_list(th_counts),
                                      wavelet_levels(th.p, true), in);
    json rows = json::array();
    for (const auto& x : r.rows)
      rows.push_back({{"k", x.k}, {"m", x.m}, {"lhs_ii", x.lhs_ii}, {"slack_ii", x.slack_ii}, {"m_hat", x.m_hat},
                      {"m_required", x.m_required}, {"slack_m", x.slack_m}, {"m_corollary", x.m_corollary}});
    emit({{"rows", rows},
          {"B", r.B},
          {"q", r.q},
          {"L", r.L},
          {"kappa", r.kappa.levels},
          {"kappa_hat", r.kappa_hat.estimate},
          {"mtilde", r.mtilde_used},
          {"mtilde_fallback", r.mtilde_fallback},
          {"condition_i", r.condition_i},
          {"condition_ii", r.condition_ii},
          {"probability_one", r.probability_one}},
         th.out);
  });

  // E(p)
  Common ee;
  int ee_lo = 4, ee_hi = 6;
  std::size_t ee_trials = 100;
  auto* c_ee = app.add_subcommand("e-experiment", "E(p) = max B-tilde over random piecewise-constant supports");
  add_common(c_ee, ee);
  c_ee->add_option("--p-lo", ee_lo);
  c_ee->add_option("--p-hi", ee_hi);
  c_ee->add_option("--trials", ee_trials);
  c_ee->callback([&] {
    json rows = json::array();
    for (const auto& r : e_experiment(ee_lo, ee_hi, ee_trials, ee.seed))
      rows.push_back({{"p", r.p}, {"E", r.E}, {"mean", r.mean}, {"min", r.min}, {"trials", r.trials}});
    emit(rows, ee.out);
  });

  // certificate
  Common ce;
  std::string ce_delta = "random:4";
  double ce_q = 0.9, ce_eps = 0.1;
  std::size_t ce_trials = 1;
  std::optional<std::size_t> ce_mu, ce_nu;
  bool ce_Lg = false;
  auto* c_ce = app.add_subcommand("certificate", "golfing dual certificate and its verification");
  add_common(c_ce, ce);
  c_ce->add_option("--delta-spec", ce_delta, "random:S | list:i,j,... | signal:file.csv");
  c_ce->add_option("--q", ce_q, "sampling density per level");
  c_ce->add_option("--epsilon", ce_eps);
  c_ce->add_option("--mu", ce_mu, "override the iteration count");
  c_ce->add_option("--nu", ce_nu, "override the hit count");
  c_ce->add_flag("--L-golfing", ce_Lg, "use the golfing form of L in condition (v)");
  c_ce->add_option("--trials", ce_trials, "independent constructions (seeds derived from --seed)");
  c_ce->callback([&] {
    const std::size_t n = std::size_t(1) << ce.p;
    Mat V = dft_matrix(n).mat(), D = haar_frame_redundant(ce.p).mat();
    auto Ml = wavelet_levels(ce.p, false), Nl = wavelet_levels(ce.p, true);
    json trials = json::array();
    std::size_t certified = 0;
    for (std::size_t t = 0; t < ce_trials; ++t) {
      std::uint64_t sd = derive_seed(ce.seed, {t});
      IndexSet Delta = parse_delta(ce_delta, D, sd);
      auto rng = make_rng(sd, {0xf});
      Vec x = Vec::Zero(2 * n);
      std::normal_distribution<double> nd;
      for (auto i : Delta.indices()) x(i - 1) = nd(rng);
      GolfingConfig c{Ml, Nl, std::vector<double>(Ml.r(), ce_q)};
      c.epsilon = ce_eps;
      c.mu = ce_mu;
      c.nu = ce_nu;
      c.L_from_golfing = ce_Lg;
      c.seed = sd;
      auto r = golfing_construct(V, D, Delta, Vec(D.adjoint() * x), c);
      certified += r.certified();
      json j = to_json(r);
      j["seed"] = sd;
      j["delta"] = Delta.indices();
      trials.push_back(j);
    }
    emit({{"trials", trials}, {"certified", certified}, {"q", ce_q}, {"p", ce.p}, {"seed", ce.seed}}, ce.out);
  });

  // concentration
  Common cc;
  std::string cc_scn = "prop1", cc_delta = "random:4";
  double cc_q = 0.9, cc_alpha = 0.5, cc_gamma = 0.1;
  std::size_t cc_trials = 200;
  auto* c_cc = app.add_subcommand("concentration", "Monte Carlo frequency of a concentration event");
  add_common(c_cc, cc);
  c_cc->add_option("--scenario", cc_scn, "prop1 | prop2 | prop3 | prop4");
  c_cc->add_option("--delta-spec", cc_delta);
  c_cc->add_option("--q", cc_q);
  c_cc->add_option("--alpha", cc_alpha);
  c_cc->add_option("--gamma", cc_gamma);
  c_cc->add_option("--trials", cc_trials);
  c_cc->callback([&] {
    const std::size_t n = std::size_t(1) << cc.p;
    Mat V = dft_matrix(n).mat(), D = haar_frame_redundant(cc.p).mat();
    auto Ml = wavelet_levels(cc.p, false);
    ConcentrationOptions o;
    o.gamma = cc_gamma;
    auto r = concentration_check(parse_scenario(cc_scn), V, D, parse_delta(cc_delta, D, cc.seed), Ml,
                                 wavelet_levels(cc.p, true), std::vector<double>(Ml.r(), cc_q), cc_alpha, cc_trials,
                                 cc.seed, o);
    emit(to_json(r), cc.out);
  });

  // experiments
  std::string run_cfg, run_out;
  auto* c_run = app.add_subcommand("run", "run an experiment from a JSON config");
  c_run->add_option("--config", run_cfg, "config JSON")->required();
  c_run->add_option("--out", run_out, "output directory (overrides the config)");
  c_run->callback([&] { code = run_report(load_config(run_cfg), run_out); });

  for (std::string id : {"fig2", "fig3", "fig4", "sweep"}) {
    auto* c = app.add_subcommand(id, "run the " + id + " experiment (defaults unless --config)");
    auto cfg_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::optional<std::uint64_t>>();
    c->add_option("--config", *cfg_path, "config JSON");
    c->add_option("--out", *out, "output directory");
    c->add_option("--seed", *seed, "root seed");
    c->callback([&, id, cfg_path, out, seed] {
      ExperimentConfig cfg = cfg_path->empty() ? ExperimentConfig{} : load_config(*cfg_path);
      cfg.id = id;
      if (*seed) cfg.seed = **seed;
      code = run_report(cfg, *out);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
