#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "framecs/levels.hpp"
#include "framecs/random.hpp"

namespace framecs {

// (M, m): boundaries plus per-level counts, m_k <= M_k - M_{k-1}
struct LevelStructure {
  LevelPartition partition;
  std::vector<std::size_t> counts;

  LevelStructure() = default;
  LevelStructure(std::vector<std::size_t> boundaries, std::vector<std::size_t> m)
      : partition(std::move(boundaries)), counts(std::move(m)) {
    require(counts.size() == partition.r(), ErrorKind::invalid_counts, "one count per level required");
    for (std::size_t k = 1; k <= partition.r(); ++k)
      require(counts[k - 1] <= partition.size(k), ErrorKind::invalid_counts,
              "m_" + std::to_string(k) + " = " + std::to_string(counts[k - 1]) + " exceeds stratum size " +
                  std::to_string(partition.size(k)));
  }
  std::size_t r() const { return partition.r(); }
  const std::vector<std::size_t>& boundaries() const { return partition.boundaries(); }
};

enum class SchemeKind { multilevel, bernoulli, half_half, uniform, lowest };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::multilevel: return "multilevel";
    case SchemeKind::bernoulli: return "bernoulli";
    case SchemeKind::half_half: return "half_half";
    case SchemeKind::uniform: return "uniform";
    case SchemeKind::lowest: return "lowest";
  }
  return "?";
}

inline SchemeKind parse_scheme_kind(const std::string& s) {
  for (auto k : {SchemeKind::multilevel, SchemeKind::bernoulli, SchemeKind::half_half, SchemeKind::uniform,
                 SchemeKind::lowest})
    if (to_string(k) == s || (s == "half-half" && k == SchemeKind::half_half)) return k;
  fail(ErrorKind::invalid_input, "unknown scheme kind '" + s + "'");
}

struct SamplingScheme {
  SchemeKind kind = SchemeKind::multilevel;
  LevelStructure levels;                     // nominal counts
  std::vector<std::size_t> realized_counts;  // |Omega_k| as drawn
  std::vector<IndexSet> per_level;
  IndexSet omega;
  std::vector<double> densities;             // nominal q_k = m_k / (M_k - M_{k-1})
  std::uint64_t seed = 0;

  std::size_t ambient() const { return omega.ambient(); }
};

namespace detail {

inline SamplingScheme assemble(SchemeKind kind, LevelStructure levels, std::vector<std::vector<std::size_t>> picks,
                               std::vector<double> q, std::uint64_t seed, std::size_t ambient) {
  SamplingScheme s;
  s.kind = kind;
  s.seed = seed;
  s.densities = std::move(q);
  std::vector<std::size_t> all;
  for (auto& p : picks) {
    s.realized_counts.push_back(p.size());
    all.insert(all.end(), p.begin(), p.end());
    s.per_level.emplace_back(std::move(p), ambient);
  }
  s.omega = IndexSet(std::move(all), ambient);
  s.levels = std::move(levels);
  return s;
}

inline std::vector<double> nominal_q(const LevelStructure& L) {
  std::vector<double> q;
  for (std::size_t k = 1; k <= L.r(); ++k) q.push_back(double(L.counts[k - 1]) / double(L.partition.size(k)));
  return q;
}

}  // namespace detail

// uniform without replacement inside each stratum, one RNG stream per level
inline SamplingScheme multilevel_scheme(const LevelStructure& levels, std::uint64_t seed,
                                        SchemeKind tag = SchemeKind::multilevel) {
  const auto& P = levels.partition;
  std::vector<std::vector<std::size_t>> picks;
  for (std::size_t k = 1; k <= P.r(); ++k) {
    auto rng = make_rng(seed, {k});
    auto draw = sample_without_replacement(rng, P.size(k), levels.counts[k - 1]);
    for (auto& j : draw) j += P.lower(k) + 1;
    picks.push_back(std::move(draw));
  }
  return detail::assemble(tag, levels, std::move(picks), detail::nominal_q(levels), seed, P.total());
}

// independent inclusion with probability q_k per index of stratum k
inline std::vector<std::vector<std::size_t>> bernoulli_draw(const LevelPartition& P, const std::vector<double>& q,
                                                           std::uint64_t seed) {
  require(q.size() == P.r(), ErrorKind::invalid_input, "one density per level required");
  std::vector<std::vector<std::size_t>> picks;
  for (std::size_t k = 1; k <= P.r(); ++k) {
    require(q[k - 1] >= 0.0 && q[k - 1] <= 1.0, ErrorKind::invalid_input, "densities must lie in [0,1]");
    auto rng = make_rng(seed, {k});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::size_t> pick;
    for (std::size_t j = P.lower(k) + 1; j <= P.upper(k); ++j)
      if (u(rng) < q[k - 1]) pick.push_back(j);
    picks.push_back(std::move(pick));
  }
  return picks;
}

inline SamplingScheme bernoulli_scheme(const LevelStructure& levels, std::uint64_t seed) {
  auto q = detail::nominal_q(levels);
  auto picks = bernoulli_draw(levels.partition, q, seed);
  return detail::assemble(SchemeKind::bernoulli, levels, std::move(picks), std::move(q), seed,
                          levels.partition.total());
}

// Bernoulli scheme from real-valued densities; nominal counts are round(q_k * stratum)
inline SamplingScheme bernoulli_scheme_q(const LevelPartition& P, const std::vector<double>& q, std::uint64_t seed) {
  auto picks = bernoulli_draw(P, q, seed);
  std::vector<std::size_t> m;
  for (std::size_t k = 1; k <= P.r(); ++k) m.push_back(static_cast<std::size_t>(std::llround(q[k - 1] * double(P.size(k)))));
  return detail::assemble(SchemeKind::bernoulli, LevelStructure(P.boundaries(), m), std::move(picks), q, seed,
                          P.total());
}

inline SamplingScheme named_scheme(SchemeKind kind, std::size_t budget, std::size_t n_low, std::size_t ambient,
                                   std::uint64_t seed) {
  require(ambient >= 1, ErrorKind::invalid_budget, "ambient dimension must be >= 1");
  require(budget <= ambient, ErrorKind::invalid_budget,
          "budget " + std::to_string(budget) + " exceeds ambient " + std::to_string(ambient));
  switch (kind) {
    case SchemeKind::half_half: {
      require(n_low <= budget, ErrorKind::invalid_budget, "n_low exceeds budget");
      if (n_low == 0 || n_low == ambient)
        return multilevel_scheme(LevelStructure({ambient}, {budget}), seed, SchemeKind::half_half);
      return multilevel_scheme(LevelStructure({n_low, ambient}, {n_low, budget - n_low}), seed, SchemeKind::half_half);
    }
    case SchemeKind::uniform:
      return multilevel_scheme(LevelStructure({ambient}, {budget}), seed, SchemeKind::uniform);
    case SchemeKind::lowest:
      if (budget == 0 || budget == ambient)
        return multilevel_scheme(LevelStructure({ambient}, {budget}), seed, SchemeKind::lowest);
      return multilevel_scheme(LevelStructure({budget, ambient}, {budget, 0}), seed, SchemeKind::lowest);
    default:
      fail(ErrorKind::invalid_input, "named_scheme supports half_half, uniform, lowest");
  }
}

struct DensitySummary {
  std::vector<double> q_levels;
  double q = 0;      // min_k q_k
  double q_inv = 0;  // max_k (M_k - M_{k-1}) / m_k
};

inline DensitySummary density_summary(const LevelStructure& L) {
  DensitySummary d;
  d.q = 1.0;
  for (std::size_t k = 1; k <= L.r(); ++k) {
    std::size_t m = L.counts[k - 1];
    require(m >= 1, ErrorKind::division_guard, "m_" + std::to_string(k) + " = 0");
    double size = double(L.partition.size(k));
    d.q_levels.push_back(double(m) / size);
    d.q = std::min(d.q, double(m) / size);
    d.q_inv = std::max(d.q_inv, size / double(m));
  }
  return d;
}

inline DensitySummary density_summary(const SamplingScheme& s) { return density_summary(s.levels); }

inline bool is_full_sampling(const LevelStructure& L) {
  for (std::size_t k = 1; k <= L.r(); ++k)
    if (L.counts[k - 1] != L.partition.size(k)) return false;
  return true;
}

// ---- JSON {kind, boundaries, counts, seed, indices, ...}

inline nlohmann::json to_json(const SamplingScheme& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["boundaries"] = s.levels.boundaries();
  j["counts"] = s.levels.counts;
  j["realized_counts"] = s.realized_counts;
  j["densities"] = s.densities;
  j["seed"] = s.seed;
  j["ambient"] = s.ambient();
  j["indices"] = s.omega.indices();
  return j;
}

inline SamplingScheme scheme_from_json(const nlohmann::json& j) {
  try {
    auto kind = parse_scheme_kind(j.at("kind").get<std::string>());
    auto boundaries = j.at("boundaries").get<std::vector<std::size_t>>();
    auto counts = j.at("counts").get<std::vector<std::size_t>>();
    auto seed = j.value("seed", std::uint64_t(0));
    auto indices = j.at("indices").get<std::vector<std::size_t>>();
    LevelStructure L(boundaries, counts);
    std::size_t ambient = j.value("ambient", L.partition.total());
    std::vector<std::vector<std::size_t>> picks(L.r());
    for (auto i : indices) {
      require(i >= 1 && i <= L.partition.total(), ErrorKind::invalid_index, "scheme index outside levels");
      picks[L.partition.level_of(i) - 1].push_back(i);
    }
    for (auto& p : picks) std::sort(p.begin(), p.end());
    std::vector<double> q = j.contains("densities") ? j["densities"].get<std::vector<double>>() : detail::nominal_q(L);
    return detail::assemble(kind, L, std::move(picks), std::move(q), seed, ambient);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("scheme JSON: ") + e.what());
  }
}

}  // namespace framecs
