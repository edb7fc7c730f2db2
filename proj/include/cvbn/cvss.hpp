#pragma once

// CVSS-style metric layer: metric levels and their probability caps, the
// attack-surface and node-metric tables, CPT synthesis from metric levels,
// and the [0, 10] vulnerability score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cvbn/bn.hpp"
#include "cvbn/error.hpp"
#include "cvbn/rng.hpp"

namespace cvbn {

enum class MetricLevel { NA, L, M, H };
enum class SynthesisMode { Fixed, Random };

inline constexpr std::size_t kImpactStates = 5;
/// Upper probability bound of each impact state none, low, med, high, cri.
inline constexpr std::array<double, kImpactStates> kImpactCaps = {0.01, 0.39, 0.69, 0.89, 1.0};
/// Score contributed by each impact state on the [0, 10] scale.
inline constexpr std::array<double, kImpactStates> kScoreAnchors = {0.1, 3.9, 6.9, 8.9, 10.0};
inline const std::vector<std::string> kImpactLabels = {"none", "low", "med", "high", "cri"};
inline const std::vector<std::string> kLevelLabels = {"low", "med", "high"};

inline constexpr double level_cap(MetricLevel level) {
  switch (level) {
    case MetricLevel::L: return 0.25;
    case MetricLevel::M: return 0.50;
    case MetricLevel::H: return 0.75;
    case MetricLevel::NA: return 0.0;
  }
  return 0.0;
}

/// Lower (exclusive) end of the level's band; the cap is the upper end.
inline constexpr double level_floor(MetricLevel level) {
  switch (level) {
    case MetricLevel::L: return 0.0;
    case MetricLevel::M: return 0.25;
    case MetricLevel::H: return 0.50;
    case MetricLevel::NA: return 0.0;
  }
  return 0.0;
}

inline MetricLevel parse_level(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "l" || s == "low") return MetricLevel::L;
  if (s == "m" || s == "med" || s == "medium") return MetricLevel::M;
  if (s == "h" || s == "high") return MetricLevel::H;
  if (s == "na" || s == "n/a" || s == "-") return MetricLevel::NA;
  throw Error(ErrorKind::ParseError, "unknown metric level '" + std::string(text) + "'");
}

inline std::string_view level_code(MetricLevel level) {
  switch (level) {
    case MetricLevel::L: return "L";
    case MetricLevel::M: return "M";
    case MetricLevel::H: return "H";
    case MetricLevel::NA: return "NA";
  }
  return "NA";
}

/// Fixed mode returns the cap; random mode draws uniformly from the band.
inline double level_weight(MetricLevel level, SynthesisMode mode, Rng& rng) {
  if (level == MetricLevel::NA) return 0.0;
  if (mode == SynthesisMode::Fixed) return level_cap(level);
  return rng.uniform_open_closed(level_floor(level), level_cap(level));
}

using LevelVector = std::array<MetricLevel, 3>;

struct AttackSurface {
  std::string target;       // SA, RSE or VEHs
  std::string attack_type;  // LTC, CRL, ...
  std::string feasibility_label;
  LevelVector feasibility{};
  std::string detection_label;
  LevelVector detection{};
};

struct NodeMetric {
  std::string node;
  MetricLevel confidentiality = MetricLevel::NA;
  MetricLevel integrity = MetricLevel::NA;
  MetricLevel availability = MetricLevel::NA;
};

namespace detail {

inline std::vector<double> normalized(std::vector<double> w, std::string_view what) {
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > 0.0)) throw Error(ErrorKind::DegenerateMetric, std::string(what) + " has zero weight");
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace detail

/// Root prior over attack feasibility (low, med, high).
inline std::vector<double> feasibility_prior(const AttackSurface& s, SynthesisMode mode, Rng& rng) {
  std::vector<double> w(3);
  for (std::size_t i = 0; i < 3; ++i) w[i] = level_weight(s.feasibility[i], mode, rng);
  return detail::normalized(std::move(w), s.attack_type + " feasibility");
}

/// CPT of a detection node whose parents are the attack nodes of `surfaces`
/// (each over low, med, high). Entry (d | a_1..a_m) is proportional to
/// prod_j weight(detection_j[d]) * weight(feasibility_j[a_j]) and each row is
/// normalized over d. With a single surface this is the outer product
/// detection^T x feasibility with column normalization. In random mode each
/// vector entry is drawn once and shared by all rows.
inline std::vector<double> detection_cpt(const std::vector<const AttackSurface*>& surfaces,
                                         SynthesisMode mode, Rng& rng) {
  std::vector<std::array<double, 3>> det(surfaces.size()), feas(surfaces.size());
  for (std::size_t j = 0; j < surfaces.size(); ++j) {
    for (std::size_t d = 0; d < 3; ++d) det[j][d] = level_weight(surfaces[j]->detection[d], mode, rng);
    for (std::size_t a = 0; a < 3; ++a)
      feas[j][a] = level_weight(surfaces[j]->feasibility[a], mode, rng);
  }
  std::size_t rows = 1;
  for (std::size_t j = 0; j < surfaces.size(); ++j) rows *= 3;
  std::vector<double> table(rows * 3);
  std::vector<std::size_t> assign(surfaces.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> w(3, 1.0);
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t j = 0; j < surfaces.size(); ++j) w[d] *= det[j][d] * feas[j][assign[j]];
    double sum = w[0] + w[1] + w[2];
    if (!(sum > 0.0)) {
      std::string what = "detection";
      for (const auto* s : surfaces) what += " " + s->attack_type;
      throw Error(ErrorKind::DegenerateMetric, what + " has zero weight");
    }
    for (std::size_t d = 0; d < 3; ++d) table[r * 3 + d] = w[d] / sum;
    for (std::size_t j = surfaces.size(); j-- > 0;) {
      if (++assign[j] < 3) break;
      assign[j] = 0;
    }
  }
  return table;
}

inline std::vector<double> detection_cpt(const AttackSurface& surface, SynthesisMode mode,
                                         Rng& rng) {
  return detection_cpt(std::vector<const AttackSurface*>{&surface}, mode, rng);
}

/// Transmission probability of a node: mean of its non-NA C/I/A weights
/// (0 when all three are NA).
inline double transmission(const NodeMetric& m, SynthesisMode mode, Rng& rng) {
  double sum = 0.0;
  int count = 0;
  for (MetricLevel l : {m.confidentiality, m.integrity, m.availability}) {
    if (l == MetricLevel::NA) continue;
    sum += level_weight(l, mode, rng);
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

/// Severity rank (0 = none .. 4 = cri) of each state of a variable.
using RankMap = std::vector<int>;

inline const RankMap kImpactRanks = {0, 1, 2, 3, 4};
inline const RankMap kAttackRanks = {1, 2, 3};       // low, med, high attack feasibility
inline const RankMap kDetectionRanks = {3, 1, 0};    // severity that escapes detection
inline const RankMap kImpact3Ranks = {0, 2, 3};      // low, med, high impact level
inline const RankMap kSensorRanks = {0, 1};          // true (working), false

struct SusceptibilityOptions {
  double leak = 0.01;
  double tail_ratio = 0.5;
  std::optional<double> transmission;  // overrides the CIA-derived value
  int floor_rank = 0;                  // minimum effective parent severity
};

/// Noisy-MAX CPT. For each parent row, s* is the largest parent severity rank
/// (at least floor_rank) and t the child state with the largest rank <= s*.
/// If rank(t) > 0 the child takes t with probability w * cap(s*), every child
/// state j with 0 < rank(j) < rank(t) gets leak * ratio^(rank(t) - rank(j)),
/// and the rank-0 state takes the rest. If rank(t) == 0 only the leak escapes,
/// into the lowest positive-rank state.
inline std::vector<double> susceptibility_cpt(const RankMap& child, double w,
                                              const std::vector<RankMap>& parents,
                                              const SusceptibilityOptions& opt = {}) {
  const auto none_it = std::find(child.begin(), child.end(), 0);
  if (none_it == child.end())
    throw Error(ErrorKind::DegenerateMetric, "child state space has no attack-free state");
  const std::size_t none = static_cast<std::size_t>(none_it - child.begin());
  const std::size_t card = child.size();

  // one row pattern per effective severity 0..4
  std::array<std::vector<double>, kImpactStates> pattern;
  for (int s = 0; s < static_cast<int>(kImpactStates); ++s) {
    std::vector<double> row(card, 0.0);
    std::size_t target = none;
    for (std::size_t j = 0; j < card; ++j)
      if (child[j] <= s && child[j] > child[target]) target = j;
    if (child[target] == 0) {
      std::size_t lowest = card;
      for (std::size_t j = 0; j < card; ++j)
        if (child[j] > 0 && (lowest == card || child[j] < child[lowest])) lowest = j;
      row[none] = 1.0;
      if (lowest != card) {
        row[lowest] = opt.leak;
        row[none] -= opt.leak;
      }
    } else {
      row[target] = w * kImpactCaps[static_cast<std::size_t>(s)];
      double rest = row[target];
      for (std::size_t j = 0; j < card; ++j)
        if (child[j] > 0 && child[j] < child[target]) {
          row[j] = opt.leak * std::pow(opt.tail_ratio, child[target] - child[j]);
          rest += row[j];
        }
      row[none] = 1.0 - rest;
    }
    pattern[static_cast<std::size_t>(s)] = std::move(row);
  }

  std::size_t rows = 1;
  for (const auto& p : parents) rows *= p.size();
  std::vector<double> table(rows * card);
  std::vector<std::size_t> assign(parents.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    int s = opt.floor_rank;
    for (std::size_t j = 0; j < parents.size(); ++j) s = std::max(s, parents[j][assign[j]]);
    s = std::clamp(s, 0, static_cast<int>(kImpactStates) - 1);
    std::copy(pattern[static_cast<std::size_t>(s)].begin(),
              pattern[static_cast<std::size_t>(s)].end(),
              table.begin() + static_cast<long>(r * card));
    for (std::size_t j = parents.size(); j-- > 0;) {
      if (++assign[j] < parents[j].size()) break;
      assign[j] = 0;
    }
  }
  return table;
}

inline std::vector<double> susceptibility_cpt(const RankMap& child, const NodeMetric& metric,
                                              const std::vector<RankMap>& parents,
                                              SynthesisMode mode, Rng& rng,
                                              const SusceptibilityOptions& opt = {}) {
  const double w = opt.transmission ? *opt.transmission : transmission(metric, mode, rng);
  return susceptibility_cpt(child, w, parents, opt);
}

// ---------------------------------------------------------------------------
// Scores

struct VulnerabilityScore {
  double mean = 0.0;
  double sd = 0.0;
  std::array<double, kImpactStates> state_probs{};
};

/// Inputs whose total is off by more than this are rejected; smaller gaps
/// (rounded vectors) are renormalized.
inline constexpr double kScoreInputTolerance = 0.02;

inline VulnerabilityScore vulnerability_score(std::span<const double> probs) {
  if (probs.size() != kImpactStates)
    throw Error(ErrorKind::UnnormalizedInput, "expected 5 impact-state probabilities");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error(ErrorKind::UnnormalizedInput, "negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kScoreInputTolerance)
    throw Error(ErrorKind::UnnormalizedInput, "probabilities sum to " + std::to_string(sum));
  VulnerabilityScore out;
  double second = 0.0;
  for (std::size_t s = 0; s < kImpactStates; ++s) {
    out.state_probs[s] = probs[s] / sum;
    out.mean += out.state_probs[s] * kScoreAnchors[s];
    second += out.state_probs[s] * kScoreAnchors[s] * kScoreAnchors[s];
  }
  out.mean = std::clamp(out.mean, 0.0, 10.0);
  out.sd = std::sqrt(std::max(0.0, second - out.mean * out.mean));
  return out;
}

inline VulnerabilityScore vulnerability_score(std::initializer_list<double> probs) {
  return vulnerability_score(std::span<const double>(probs.begin(), probs.size()));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// mu +- 2 sigma clamped to the [0, 10] scale.
inline Interval confidence_interval(double mean, double sd) {
  return {std::max(0.0, mean - 2.0 * sd), std::min(10.0, mean + 2.0 * sd)};
}

inline Interval confidence_interval(const VulnerabilityScore& s) {
  return confidence_interval(s.mean, s.sd);
}

// ---------------------------------------------------------------------------
// Shipped metric tables

/// Directory holding the shipped data files. CVBN_DATA_PATH overrides the
/// compiled-in location.
inline std::string data_dir() {
  if (const char* env = std::getenv("CVBN_DATA_PATH"); env && *env) return env;
#ifdef CVBN_DATA_DIR
  return CVBN_DATA_DIR;
#else
  return "data";
#endif
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

namespace detail {

inline LevelVector parse_vector(const nlohmann::json& j) {
  const auto items = j.get<std::vector<std::string>>();
  if (items.size() != 3) throw Error(ErrorKind::ParseError, "metric vectors have 3 entries");
  LevelVector v{};
  for (std::size_t i = 0; i < 3; ++i) {
    v[i] = parse_level(items[i]);
    if (v[i] == MetricLevel::NA)
      throw Error(ErrorKind::ParseError, "metric vectors use l, m or h");
  }
  return v;
}

inline void expect_format(const nlohmann::json& doc, std::string_view format) {
  if (doc.value("format", "") != format || doc.value("version", 0) != 1)
    throw Error(ErrorKind::ParseError, "expected " + std::string(format) + " version 1");
}

}  // namespace detail

using SurfaceTable = std::map<std::string, AttackSurface>;
using MetricTable = std::map<std::string, NodeMetric>;

inline SurfaceTable attack_surfaces_from_json(const nlohmann::json& doc) {
  detail::expect_format(doc, "cvbn-attack-surfaces");
  SurfaceTable table;
  try {
    for (const auto& row : doc.at("surfaces")) {
      AttackSurface s;
      s.target = row.at("target").get<std::string>();
      s.attack_type = row.at("type").get<std::string>();
      s.feasibility_label = row.at("feasibility").get<std::string>();
      s.feasibility = detail::parse_vector(row.at("feasibility_metric"));
      s.detection_label = row.at("detection").get<std::string>();
      s.detection = detail::parse_vector(row.at("detection_metric"));
      table[s.attack_type] = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return table;
}

inline MetricTable node_metrics_from_json(const nlohmann::json& doc) {
  detail::expect_format(doc, "cvbn-node-metrics");
  MetricTable table;
  try {
    for (const auto& row : doc.at("nodes")) {
      NodeMetric m;
      m.node = row.at("node").get<std::string>();
      m.confidentiality = parse_level(row.at("C").get<std::string>());
      m.integrity = parse_level(row.at("I").get<std::string>());
      m.availability = parse_level(row.at("A").get<std::string>());
      table[m.node] = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return table;
}

inline SurfaceTable load_attack_surfaces(const std::string& dir = data_dir()) {
  return attack_surfaces_from_json(read_json_file(dir + "/attack_surfaces.json"));
}

/// `application` is "cacc" or "isig".
inline MetricTable load_node_metrics(const std::string& application,
                                     const std::string& dir = data_dir()) {
  return node_metrics_from_json(read_json_file(dir + "/node_metrics_" + application + ".json"));
}

}  // namespace cvbn
