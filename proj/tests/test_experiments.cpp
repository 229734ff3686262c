#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "framecs/experiments.hpp"

using namespace framecs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("framecs_test_" + name);
  fs::remove_all(d);
  return d;
}

ExperimentConfig small_fig3() {
  ExperimentConfig c;
  c.id = "fig3";
  c.seed = 5;
  c.fig3.p_lo = 2;
  c.fig3.p_hi = 4;
  c.fig3.trials = 20;
  return c;
}

ExperimentConfig small_fig4() {
  ExperimentConfig c;
  c.id = "fig4";
  c.seed = 5;
  c.fig4.p = 6;
  c.fig4.trials = 40;
  c.fig4.breaks = 5;
  return c;
}

}  // namespace

TEST(Experiments, CsvByteReproducible) {
  for (const auto& cfg : {small_fig3(), small_fig4()}) {
    auto a = scratch(cfg.id + "_a"), b = scratch(cfg.id + "_b");
    write_report(run_experiment(cfg), a.string());
    write_report(run_experiment(cfg), b.string());
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ++n;
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    }
    EXPECT_GT(n, 0u);
    EXPECT_TRUE(fs::exists(a / "report.json"));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Experiments, CsvCarriesProvenance) {
  auto cfg = small_fig3();
  auto rep = run_fig3(cfg);
  const auto& csv = rep.csv.at("fig3_E.csv");
  EXPECT_EQ(csv.rfind("# framecs fig3 config_hash=" + config_hash(cfg), 0), 0u);
  EXPECT_TRUE(rep.all_pass());
}

TEST(Experiments, ConfigHash) {
  auto a = small_fig3(), b = small_fig3();
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Experiments, ConfigJsonRoundTrip) {
  auto c = small_fig4();
  c.sweep.budgets = {10, 20};
  c.fig2.window_lo = 3;
  auto d = config_from_json(to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  EXPECT_EQ(config_hash(d), config_hash(c));
}

TEST(Experiments, ConfigErrors) {
  EXPECT_THROW(config_from_json(json{{"experiment", "fig9"}}), Error);
  EXPECT_THROW(config_from_json(json{{"experiment", "custom"}}), Error);
  EXPECT_THROW(config_from_json(json{{"fig4", {{"signal_file", "/nonexistent/x.csv"}}}}), Error);
  EXPECT_THROW(config_from_json(json{{"fig2", {{"window", {1, 2, 3}}}}}), Error);
  EXPECT_THROW(config_from_json(json{{"seed", "abc"}}), Error);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
  auto p = scratch("badjson.json");
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config(p.string()), Error);
  fs::remove(p);
}

TEST(Experiments, DefaultsParseFromEmpty) {
  auto c = config_from_json(json::object());
  EXPECT_EQ(c.id, "fig2");
  EXPECT_EQ(c.fig2.budget, 130u);
  EXPECT_EQ(c.fig2.n_low, 41u);
}

TEST(Experiments, Fig4ZeroSignal) {
  auto c = small_fig4();
  c.fig4.zero_signal = true;
  auto r = fig4_profile(c.fig4, c.seed);
  for (std::size_t k = 0; k < r.s.size(); ++k) {
    EXPECT_EQ(r.s[k], 0u);
    EXPECT_EQ(r.kappa[k], 0.0);
  }
  EXPECT_EQ(r.correlation, 0.0);
  auto rep = run_fig4(c);
  EXPECT_TRUE(rep.assertions.empty());
}

TEST(Experiments, Fig4LevelSizes) {
  auto c = small_fig4();
  auto r = fig4_profile(c.fig4, c.seed);
  std::size_t total = 0;
  for (auto s : r.sizes) total += s;
  EXPECT_EQ(total, 2u * 64u);
  for (std::size_t k = 0; k < r.s.size(); ++k) EXPECT_LE(r.s[k], r.sizes[k]);
}

TEST(Experiments, Fig4SignalFile) {
  auto c = small_fig4();
  auto ref = fig4_profile(c.fig4, c.seed);
  auto p = scratch("fig4_signal.csv");
  io::save_signal_csv(p.string(), Vec(ref.f.cast<cplx>()));
  c.fig4.signal_file = p.string();
  auto r = fig4_profile(c.fig4, c.seed);
  EXPECT_EQ(r.s, ref.s);
  c.fig4.p = 5;
  EXPECT_THROW(fig4_profile(c.fig4, c.seed), Error);
  fs::remove(p);
}

TEST(Experiments, SmallSweep) {
  ExperimentConfig c;
  c.id = "sweep";
  c.sweep.p = 5;
  c.sweep.budgets = {8, 16};
  c.sweep.kinds = {"half_half", "lowest"};
  c.sweep.seeds = 1;
  c.sweep.sparsity = 20;
  c.sweep.max_iter = 2000;
  auto rep = run_experiment(c);
  EXPECT_EQ(rep.rows.size(), 4u);
  EXPECT_TRUE(rep.all_pass());
  c.sweep.budgets = {64};
  EXPECT_THROW(run_sweep(c), Error);
}
