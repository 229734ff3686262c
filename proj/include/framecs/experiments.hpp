#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "framecs/diagnostics.hpp"
#include "framecs/io.hpp"
#include "framecs/sampling.hpp"
#include "framecs/signals.hpp"
#include "framecs/solver.hpp"
#include "framecs/svg.hpp"

#ifndef FRAMECS_VERSION
#define FRAMECS_VERSION "0.1.0"
#endif

namespace framecs {

using json = nlohmann::json;

// ---- config

struct Fig2Config {
  int p = 10;
  std::size_t budget = 130;
  std::size_t n_low = 41;
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  std::size_t sparsity = 100;
  std::size_t window_lo = 100, window_hi = 158;
  std::uint64_t signal_seed = 7;
  std::size_t max_iter = 20000;
  std::string x1_file, x2_file;  // optional; generated from signal_seed when empty
  double pass_fraction = 0.9;
};

struct Fig3Config {
  int p_lo = 4, p_hi = 10;
  std::size_t trials = 1000;
};

struct Fig4Config {
  int p = 10;
  std::size_t trials = 1000;
  std::size_t breaks = 24;
  std::uint64_t signal_seed = 11;
  bool frame = true;
  bool zero_signal = false;
  std::string signal_file;
  double min_correlation = 0.5;
};

struct SweepConfig {
  int p = 10;
  std::vector<std::string> kinds{"half_half", "uniform", "lowest"};
  std::vector<std::size_t> budgets{64, 130, 256};
  double n_low_fraction = 41.0 / 130.0;
  std::size_t seeds = 3;
  std::uint64_t first_seed = 1;
  std::string signal = "coarse";  // coarse | window | file
  std::string signal_file;
  std::size_t sparsity = 100;
  std::uint64_t signal_seed = 7;
  std::size_t max_iter = 20000;
};

struct ExperimentConfig {
  std::string id = "fig2";  // fig2 | fig3 | fig4 | sweep | custom
  std::uint64_t seed = 2024;
  std::size_t threads = 0;
  std::string output = "out";
  Fig2Config fig2;
  Fig3Config fig3;
  Fig4Config fig4;
  SweepConfig sweep;
};

namespace detail {

template <class T>
void get_opt(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

inline void check_file(const std::string& f) {
  if (!f.empty())
    require(std::filesystem::exists(f), ErrorKind::io, "referenced file does not exist: " + f);
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.id;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  const auto& a = c.fig2;
  j["fig2"] = {{"p", a.p},           {"budget", a.budget},       {"n_low", a.n_low},
               {"seeds", a.seeds},   {"first_seed", a.first_seed}, {"sparsity", a.sparsity},
               {"window", {a.window_lo, a.window_hi}}, {"signal_seed", a.signal_seed},
               {"max_iter", a.max_iter}, {"x1_file", a.x1_file}, {"x2_file", a.x2_file},
               {"pass_fraction", a.pass_fraction}};
  j["fig3"] = {{"p_lo", c.fig3.p_lo}, {"p_hi", c.fig3.p_hi}, {"trials", c.fig3.trials}};
  const auto& f = c.fig4;
  j["fig4"] = {{"p", f.p},
               {"trials", f.trials},
               {"breaks", f.breaks},
               {"signal_seed", f.signal_seed},
               {"frame", f.frame},
               {"zero_signal", f.zero_signal},
               {"signal_file", f.signal_file},
               {"min_correlation", f.min_correlation}};
  const auto& s = c.sweep;
  j["sweep"] = {{"p", s.p},           {"kinds", s.kinds},         {"budgets", s.budgets},
                {"n_low_fraction", s.n_low_fraction}, {"seeds", s.seeds}, {"first_seed", s.first_seed},
                {"signal", s.signal}, {"signal_file", s.signal_file}, {"sparsity", s.sparsity},
                {"signal_seed", s.signal_seed}, {"max_iter", s.max_iter}};
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    detail::get_opt(j, "experiment", c.id);
    detail::get_opt(j, "seed", c.seed);
    detail::get_opt(j, "threads", c.threads);
    detail::get_opt(j, "output", c.output);
    if (j.contains("fig2")) {
      const auto& a = j["fig2"];
      auto& o = c.fig2;
      detail::get_opt(a, "p", o.p);
      detail::get_opt(a, "budget", o.budget);
      detail::get_opt(a, "n_low", o.n_low);
      detail::get_opt(a, "seeds", o.seeds);
      detail::get_opt(a, "first_seed", o.first_seed);
      detail::get_opt(a, "sparsity", o.sparsity);
      if (a.contains("window")) {
        auto w = a["window"].get<std::vector<std::size_t>>();
        require(w.size() == 2, ErrorKind::invalid_input, "fig2.window needs [lo, hi]");
        o.window_lo = w[0], o.window_hi = w[1];
      }
      detail::get_opt(a, "signal_seed", o.signal_seed);
      detail::get_opt(a, "max_iter", o.max_iter);
      detail::get_opt(a, "x1_file", o.x1_file);
      detail::get_opt(a, "x2_file", o.x2_file);
      detail::get_opt(a, "pass_fraction", o.pass_fraction);
    }
    if (j.contains("fig3")) {
      detail::get_opt(j["fig3"], "p_lo", c.fig3.p_lo);
      detail::get_opt(j["fig3"], "p_hi", c.fig3.p_hi);
      detail::get_opt(j["fig3"], "trials", c.fig3.trials);
    }
    if (j.contains("fig4")) {
      const auto& a = j["fig4"];
      auto& o = c.fig4;
      detail::get_opt(a, "p", o.p);
      detail::get_opt(a, "trials", o.trials);
      detail::get_opt(a, "breaks", o.breaks);
      detail::get_opt(a, "signal_seed", o.signal_seed);
      detail::get_opt(a, "frame", o.frame);
      detail::get_opt(a, "zero_signal", o.zero_signal);
      detail::get_opt(a, "signal_file", o.signal_file);
      detail::get_opt(a, "min_correlation", o.min_correlation);
    }
    if (j.contains("sweep")) {
      const auto& a = j["sweep"];
      auto& o = c.sweep;
      detail::get_opt(a, "p", o.p);
      detail::get_opt(a, "kinds", o.kinds);
      detail::get_opt(a, "budgets", o.budgets);
      detail::get_opt(a, "n_low_fraction", o.n_low_fraction);
      detail::get_opt(a, "seeds", o.seeds);
      detail::get_opt(a, "first_seed", o.first_seed);
      detail::get_opt(a, "signal", o.signal);
      detail::get_opt(a, "signal_file", o.signal_file);
      detail::get_opt(a, "sparsity", o.sparsity);
      detail::get_opt(a, "signal_seed", o.signal_seed);
      detail::get_opt(a, "max_iter", o.max_iter);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::io, std::string("config JSON: ") + e.what());
  }
  const std::vector<std::string> ids{"fig2", "fig3", "fig4", "sweep", "custom"};
  require(std::find(ids.begin(), ids.end(), c.id) != ids.end(), ErrorKind::invalid_input,
          "unknown experiment '" + c.id + "'");
  for (const auto* f : {&c.fig2.x1_file, &c.fig2.x2_file, &c.fig4.signal_file, &c.sweep.signal_file})
    detail::check_file(*f);
  if (c.id == "custom")
    require(!c.sweep.signal_file.empty(), ErrorKind::invalid_input, "custom experiments need sweep.signal_file");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::io, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::io, std::string("config JSON: ") + e.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical (key-sorted) dump
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

// ---- report

struct ReportRow {
  std::string signal, scheme;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double rel_error = 0;  // percent
  double objective = 0;
  double residual = 0;
  std::size_t iterations = 0;
  bool converged = false;
  double wall = 0;
};

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string id;
  std::string hash;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string version = FRAMECS_VERSION;
  std::vector<ReportRow> rows;
  std::vector<Assertion> assertions;
  std::map<std::string, std::string> csv;  // file name -> content
  std::map<std::string, std::string> svg;
  json extra = json::object();

  bool all_pass() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
  }
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_header(const ExperimentReport& r) {
  std::string s = "# framecs " + r.id + " config_hash=" + r.hash + " seed=" + std::to_string(r.seed) + " seeds=";
  for (std::size_t i = 0; i < r.seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(r.seeds[i]);
  return s + "\n";
}

inline std::string rows_csv(const ExperimentReport& r) {
  std::string s = csv_header(r) + "signal,scheme,budget,seed,rel_error_pct,objective,residual,iterations,converged\n";
  for (const auto& x : r.rows)
    s += x.signal + "," + x.scheme + "," + std::to_string(x.budget) + "," + std::to_string(x.seed) + "," +
         fmt(x.rel_error) + "," + fmt(x.objective) + "," + fmt(x.residual) + "," + std::to_string(x.iterations) +
         "," + (x.converged ? "1" : "0") + "\n";
  return s;
}

inline json to_json(const ExperimentReport& r) {
  json j;
  j["experiment"] = r.id;
  j["provenance"] = {{"config_hash", r.hash}, {"seed", r.seed}, {"seeds", r.seeds}, {"version", r.version}};
  j["rows"] = json::array();
  for (const auto& x : r.rows)
    j["rows"].push_back({{"signal", x.signal},
                         {"scheme", x.scheme},
                         {"budget", x.budget},
                         {"seed", x.seed},
                         {"rel_error_pct", x.rel_error},
                         {"objective", x.objective},
                         {"residual", x.residual},
                         {"iterations", x.iterations},
                         {"converged", x.converged},
                         {"wall_seconds", x.wall}});
  j["assertions"] = json::array();
  for (const auto& a : r.assertions) j["assertions"].push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  j["all_pass"] = r.all_pass();
  j["extra"] = r.extra;
  return j;
}

inline void write_report(const ExperimentReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    require(bool(out), ErrorKind::io, "cannot write " + name);
    out << text;
  };
  for (const auto& [name, text] : r.csv) put(name, text);
  for (const auto& [name, text] : r.svg) put(name, text);
  put("report.json", to_json(r).dump(2) + "\n");
}

namespace detail {

inline ExperimentReport start_report(const ExperimentConfig& c) {
  ExperimentReport r;
  r.id = c.id;
  r.hash = config_hash(c);
  r.seed = c.seed;
  return r;
}

inline RVec load_real_signal(const std::string& path, std::size_t n) {
  auto s = io::load_signal_csv(path);
  require(s.size() == n, ErrorKind::dimension_mismatch, "signal file " + path + " has the wrong length");
  return s.vec().real();
}

template <class VOp, class DOp>
ReportRow run_cell(const std::string& name, const RVec& x, SchemeKind kind, std::size_t budget, std::size_t n_low,
                   std::uint64_t seed, const VOp& V, const DOp& D, std::size_t max_iter, Vec* keep = nullptr) {
  auto sch = named_scheme(kind, budget, n_low, x.size(), seed);
  SolverOptions o;
  o.max_iter = max_iter;
  auto t0 = std::chrono::steady_clock::now();
  auto sol = recover(Vec(x.cast<cplx>()), sch, V, D, 0.0, std::nullopt, o);
  ReportRow row;
  row.signal = name;
  row.scheme = to_string(kind);
  row.budget = budget;
  row.seed = seed;
  row.rel_error = relative_error(sol.g.vec(), Vec(x.cast<cplx>()));
  row.objective = sol.objective;
  row.residual = sol.residual;
  row.iterations = sol.iterations;
  row.converged = sol.converged;
  row.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (keep) *keep = sol.g.vec();
  return row;
}

inline svg::Series series_of(const std::string& label, const Vec& v) {
  svg::Series s;
  s.label = label;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s.x.push_back(double(i + 1));
    s.y.push_back(v(i).real());
  }
  return s;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

struct Fig2Signals {
  RVec x1, x2;
};

inline Fig2Signals fig2_signals(const Fig2Config& c) {
  const std::size_t n = std::size_t(1) << c.p;
  Fig2Signals s;
  s.x2 = c.x2_file.empty() ? coarse_heavy_signal(c.p, c.sparsity, c.signal_seed, 1).x
                           : detail::load_real_signal(c.x2_file, n);
  s.x1 = c.x1_file.empty() ? windowed_signal(c.p, c.window_lo, c.window_hi, c.sparsity, c.signal_seed).x
                           : detail::load_real_signal(c.x1_file, n);
  return s;
}

inline ExperimentReport run_fig2(const ExperimentConfig& cfg) {
  const auto& c = cfg.fig2;
  auto rep = detail::start_report(cfg);
  const std::size_t n = std::size_t(1) << c.p;
  require(c.budget <= n, ErrorKind::invalid_budget, "budget exceeds N");
  auto sig = fig2_signals(c);
  FastDft V(n);
  FastHaar D(c.p, true);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < c.seeds; ++i) seeds.push_back(c.first_seed + i);
  rep.seeds = seeds;

  // lowest-frequency sampling is deterministic; one cell per signal
  struct Cell {
    int sig;
    SchemeKind kind;
    std::uint64_t seed;
  };
  std::vector<Cell> cells{{2, SchemeKind::lowest, 0}, {1, SchemeKind::lowest, 0}};
  for (auto s : seeds)
    for (int x : {2, 1})
      for (auto k : {SchemeKind::half_half, SchemeKind::uniform}) cells.push_back({x, k, s});
  std::vector<ReportRow> rows(cells.size());
  std::vector<Vec> sols(cells.size());
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        const auto& cl = cells[i];
        bool keep = cl.kind == SchemeKind::lowest || cl.seed == seeds.front();
        rows[i] = detail::run_cell(cl.sig == 1 ? "x1" : "x2", cl.sig == 1 ? sig.x1 : sig.x2, cl.kind, c.budget,
                                   c.n_low, cl.seed, V, D, c.max_iter, keep ? &sols[i] : nullptr);
      },
      cfg.threads);
  rep.rows = rows;

  auto find = [&](const std::string& s, SchemeKind k, std::uint64_t seed) -> const ReportRow& {
    for (const auto& r : rows)
      if (r.signal == s && r.scheme == to_string(k) && (k == SchemeKind::lowest || r.seed == seed)) return r;
    fail(ErrorKind::invalid_input, "missing fig2 cell");
  };
  const double x2L = find("x2", SchemeKind::lowest, 0).rel_error;
  std::size_t passing = 0;
  std::vector<double> x2V;
  std::string per_seed = csv_header(rep) + "seed,x2_V,x2_U,x2_L,x1_V,x1_U,x1_L,pass\n";
  const double x1L = find("x1", SchemeKind::lowest, 0).rel_error;
  json nonconv = json::array();
  for (const auto& r : rows)
    if (!r.converged) nonconv.push_back(r.signal + "/" + r.scheme + "/" + std::to_string(r.seed));
  for (auto s : seeds) {
    double v = find("x2", SchemeKind::half_half, s).rel_error;
    double u = find("x2", SchemeKind::uniform, s).rel_error;
    double x1v = find("x1", SchemeKind::half_half, s).rel_error;
    double x1u = find("x1", SchemeKind::uniform, s).rel_error;
    x2V.push_back(v);
    bool ok = u >= 10 * v && x1v >= 10 * v && x2L > v && x2L < u;
    passing += ok;
    per_seed += std::to_string(s) + "," + fmt(v) + "," + fmt(u) + "," + fmt(x2L) + "," + fmt(x1v) + "," + fmt(x1u) +
                "," + fmt(x1L) + "," + (ok ? "1" : "0") + "\n";
  }
  double med = detail::median(x2V);
  rep.assertions.push_back({"median rel-error(x2, half-half) <= 0.1%", med <= 0.1, "median = " + fmt(med) + "%"});
  auto need = static_cast<std::size_t>(std::ceil(c.pass_fraction * double(seeds.size()) - 1e-9));
  rep.assertions.push_back({"seed-wise orderings hold in >= " + std::to_string(need) + " seeds", passing >= need,
                            std::to_string(passing) + "/" + std::to_string(seeds.size()) + " seeds"});
  rep.extra = {{"passing_seeds", passing}, {"median_x2_V", med}, {"nonconverged", nonconv}};

  rep.csv["fig2_cells.csv"] = rows_csv(rep);
  rep.csv["fig2_seeds.csv"] = per_seed;
  std::string sigcsv = csv_header(rep) + "index,x1,x2\n";
  for (std::size_t i = 0; i < n; ++i) sigcsv += std::to_string(i + 1) + "," + fmt(sig.x1(i)) + "," + fmt(sig.x2(i)) + "\n";
  rep.csv["fig2_signals.csv"] = sigcsv;

  // reconstructions for the first seed
  if (!seeds.empty()) {
    std::vector<svg::Panel> panels;
    for (int x : {2, 1}) {
      const RVec& xs = x == 1 ? sig.x1 : sig.x2;
      for (auto k : {SchemeKind::half_half, SchemeKind::uniform, SchemeKind::lowest}) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (cells[i].sig != x || cells[i].kind != k || (k != SchemeKind::lowest && cells[i].seed != seeds.front()))
            continue;
          svg::Panel p;
          p.title = "x" + std::to_string(x) + " " + to_string(k) + ", err " + svg::num(rows[i].rel_error) + "%";
          p.series = {detail::series_of("truth", Vec(xs.cast<cplx>())), detail::series_of("recovered", sols[i])};
          panels.push_back(std::move(p));
          break;
        }
      }
    }
    rep.svg["fig2.svg"] = svg::figure(panels, 3, "config " + rep.hash);
  }
  return rep;
}

inline ExperimentReport run_fig3(const ExperimentConfig& cfg) {
  const auto& c = cfg.fig3;
  auto rep = detail::start_report(cfg);
  rep.seeds = {cfg.seed};
  auto rows = e_experiment(c.p_lo, c.p_hi, c.trials, cfg.seed, cfg.threads);
  std::string s = csv_header(rep) + "p,E,mean,min,trials,worst_trial,worst_support\n";
  svg::Panel panel;
  panel.title = "E(p) = max B-tilde over " + std::to_string(c.trials) + " supports";
  svg::Series E{"E", {}, {}}, M{"mean", {}, {}};
  bool finite = true;
  for (const auto& r : rows) {
    s += std::to_string(r.p) + "," + fmt(r.E) + "," + fmt(r.mean) + "," + fmt(r.min) + "," + std::to_string(r.trials) +
         "," + std::to_string(r.worst_trial) + "," + std::to_string(r.worst_support) + "\n";
    E.x.push_back(r.p), E.y.push_back(r.E);
    M.x.push_back(r.p), M.y.push_back(r.mean);
    finite = finite && std::isfinite(r.E) && r.E >= 1.0 - 1e-9;
  }
  panel.series = {E, M};
  rep.csv["fig3_E.csv"] = s;
  rep.svg["fig3.svg"] = svg::figure({panel}, 1, "config " + rep.hash);
  rep.assertions.push_back({"E(p) finite and >= 1", finite, std::to_string(rows.size()) + " rows"});
  return rep;
}

struct Fig4Result {
  RVec f;
  std::vector<std::size_t> s, sizes;
  std::vector<double> s_frac, kappa, kappa_frac;
  double correlation = 0;
};

inline Fig4Result fig4_profile(const Fig4Config& c, std::uint64_t seed, std::size_t threads = 0) {
  const std::size_t n = std::size_t(1) << c.p;
  Fig4Result r;
  if (c.zero_signal) {
    r.f = RVec::Zero(n);
  } else if (!c.signal_file.empty()) {
    r.f = detail::load_real_signal(c.signal_file, n);
  } else {
    auto rng = make_rng(c.signal_seed, {0xf4});
    r.f = random_piecewise_constant(n, c.breaks, rng);
  }
  FastHaar D(c.p, c.frame);
  auto N = wavelet_levels(c.p, c.frame);
  auto Delta = analysis_support(D.apply(r.f.cast<cplx>()));
  const std::size_t lv = N.r();
  r.s.assign(lv, 0);
  for (std::size_t k = 1; k <= lv; ++k) {
    auto [lo, hi] = N.span(k, D.rows());
    r.sizes.push_back(static_cast<std::size_t>(hi - lo));
  }
  if (Delta.empty()) {
    r.kappa.assign(lv, 0.0);
  } else {
    auto kt = kappa_tilde(D, Delta, N, c.trials, seed, threads);
    r.s = kt.s;
    r.kappa = kt.kappa;
  }
  for (std::size_t k = 0; k < lv; ++k) {
    r.s_frac.push_back(double(r.s[k]) / double(r.sizes[k]));
    r.kappa_frac.push_back(r.kappa[k] / double(r.sizes[k]));
  }
  bool flat = std::all_of(r.s_frac.begin(), r.s_frac.end(), [&](double v) { return v == r.s_frac[0]; }) ||
              std::all_of(r.kappa_frac.begin(), r.kappa_frac.end(), [&](double v) { return v == r.kappa_frac[0]; });
  r.correlation = flat ? 0.0 : correlation(r.s_frac, r.kappa_frac);
  return r;
}

inline ExperimentReport run_fig4(const ExperimentConfig& cfg) {
  const auto& c = cfg.fig4;
  auto rep = detail::start_report(cfg);
  rep.seeds = {cfg.seed, c.signal_seed};
  auto r = fig4_profile(c, cfg.seed, cfg.threads);
  std::string s = csv_header(rep) + "level,size,s,s_frac,kappa_tilde,kappa_frac\n";
  svg::Panel sig, sb, kb;
  sig.title = "signal";
  sig.series = {detail::series_of("f", Vec(r.f.cast<cplx>()))};
  sb.title = "s_j / |level|";
  kb.title = "kappa-tilde_j / |level|";
  sb.bars = kb.bars = true;
  for (std::size_t k = 0; k < r.s.size(); ++k) {
    s += std::to_string(k + 1) + "," + std::to_string(r.sizes[k]) + "," + std::to_string(r.s[k]) + "," +
         fmt(r.s_frac[k]) + "," + fmt(r.kappa[k]) + "," + fmt(r.kappa_frac[k]) + "\n";
    sb.labels.push_back(std::to_string(k + 1));
    kb.labels.push_back(std::to_string(k + 1));
    sb.values.push_back(r.s_frac[k]);
    kb.values.push_back(r.kappa_frac[k]);
  }
  rep.csv["fig4_levels.csv"] = s;
  std::string sigcsv = csv_header(rep) + "index,f\n";
  for (Eigen::Index i = 0; i < r.f.size(); ++i) sigcsv += std::to_string(i + 1) + "," + fmt(r.f(i)) + "\n";
  rep.csv["fig4_signal.csv"] = sigcsv;
  rep.svg["fig4.svg"] = svg::figure({sig, sb, kb}, 3, "config " + rep.hash);
  rep.extra = {{"correlation", r.correlation}};
  if (!c.zero_signal)
    rep.assertions.push_back({"profile correlation > " + fmt(c.min_correlation), r.correlation > c.min_correlation,
                              "correlation = " + fmt(r.correlation)});
  return rep;
}

inline ExperimentReport run_sweep(const ExperimentConfig& cfg) {
  const auto& c = cfg.sweep;
  auto rep = detail::start_report(cfg);
  const std::size_t n = std::size_t(1) << c.p;
  RVec x;
  if (c.signal == "file" || cfg.id == "custom") {
    require(!c.signal_file.empty(), ErrorKind::invalid_input, "sweep.signal_file is required");
    x = detail::load_real_signal(c.signal_file, n);
  } else if (c.signal == "coarse") {
    x = coarse_heavy_signal(c.p, c.sparsity, c.signal_seed, 1).x;
  } else if (c.signal == "window") {
    x = windowed_signal(c.p, std::max<std::size_t>(1, n / 10), std::max<std::size_t>(2, n / 10 + n / 16), c.sparsity,
                        c.signal_seed)
            .x;
  } else {
    fail(ErrorKind::invalid_input, "unknown sweep signal '" + c.signal + "'");
  }
  FastDft V(n);
  FastHaar D(c.p, true);
  struct Cell {
    SchemeKind kind;
    std::size_t budget;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < c.seeds; ++i) rep.seeds.push_back(c.first_seed + i);
  for (const auto& k : c.kinds)
    for (auto b : c.budgets) {
      require(b <= n, ErrorKind::invalid_budget, "budget exceeds N");
      auto kind = parse_scheme_kind(k);
      if (kind == SchemeKind::lowest) {
        cells.push_back({kind, b, 0});
      } else {
        for (auto s : rep.seeds) cells.push_back({kind, b, s});
      }
    }
  std::vector<ReportRow> rows(cells.size());
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        auto nl = static_cast<std::size_t>(std::llround(c.n_low_fraction * double(cells[i].budget)));
        rows[i] = detail::run_cell("x", x, cells[i].kind, cells[i].budget, nl, cells[i].seed, V, D, c.max_iter);
      },
      cfg.threads);
  rep.rows = rows;
  rep.csv["sweep.csv"] = rows_csv(rep);
  std::vector<svg::Panel> panels(1);
  panels[0].title = "median relative error (%) vs budget";
  for (const auto& k : c.kinds) {
    svg::Series s{k, {}, {}};
    for (auto b : c.budgets) {
      std::vector<double> e;
      for (const auto& r : rows)
        if (r.scheme == to_string(parse_scheme_kind(k)) && r.budget == b) e.push_back(r.rel_error);
      s.x.push_back(double(b));
      s.y.push_back(detail::median(e));
    }
    panels[0].series.push_back(s);
  }
  rep.svg["sweep.svg"] = svg::figure(panels, 1, "config " + rep.hash);
  rep.assertions.push_back({"all cells finished", rows.size() == cells.size(), std::to_string(rows.size()) + " cells"});
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.id == "fig2") return run_fig2(cfg);
  if (cfg.id == "fig3") return run_fig3(cfg);
  if (cfg.id == "fig4") return run_fig4(cfg);
  return run_sweep(cfg);
}

}  // namespace framecs
