#pragma once

// Scenario files (JSON). Unknown keys are rejected so typos surface as
// validation errors instead of silently falling back to defaults.
//
// {
//   "name": "isig-nosensor",
//   "seed": 42,                      // mandatory here or via --seed
//   "out": "runs/isig",              // optional, --out wins
//   "model": "isig-nosensor",
//   "mc":   { "cycles", "replications", "mode", "queries": [..], "evidence": {"RSE": "low"} },
//   "isig": { "volumes": "500:2000:100" | [v, ...] | v, "seeds", "duration",
//             "signal": {"green", "cycle", "base_service"},
//             "grid": {"rows", "cols", "travel_mean", "straight", "turn"},
//             "scenarios": [ {"name", "probs": [5]} | {"name", "mc": dir, "query", "per_replication"} ] },
//   "cacc": { "seeds", "lows": ["N(5,5)", ..], "probs": [5], "episode_mean", "horizon",
//             "platoons", "vehicles", "desired_kmh", "densities", "trajectory" }
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvbn/cacc_sim.hpp"
#include "cvbn/csv.hpp"
#include "cvbn/isig_sim.hpp"
#include "cvbn/monte_carlo.hpp"
#include "manifest.hpp"

namespace cvbn::cli {

using nlohmann::json;

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorKind::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidConfig, std::string("bad value for '") + key + "' in " + where);
  }
}

inline std::vector<double> parse_volumes(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& x : j) {
      if (!x.is_number()) throw Error(ErrorKind::InvalidConfig, "volumes must be numbers");
      v.push_back(x.get<double>());
    }
    return v;
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::vector<double> parts;
    std::size_t pos = 0;
    while (true) {
      const auto c = s.find(':', pos);
      try {
        std::size_t used = 0;
        const std::string tok = s.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
        parts.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidConfig, "volumes must look like lo:hi:step, got '" + s + "'");
      }
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    if (parts.size() == 1) return parts;
    if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, "volumes must look like lo:hi:step, got '" + s + "'");
    return volume_range(parts[0], parts[1], parts[2]);
  }
  throw Error(ErrorKind::InvalidConfig, "volumes must be a number, a list or lo:hi:step");
}

inline std::array<double, kImpactStates> parse_probs(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != kImpactStates)
    throw Error(ErrorKind::InvalidConfig, where + ": probs needs five numbers");
  std::array<double, kImpactStates> p{};
  for (std::size_t k = 0; k < kImpactStates; ++k) {
    if (!j[k].is_number()) throw Error(ErrorKind::InvalidConfig, where + ": probs needs five numbers");
    p[k] = j[k].get<double>();
  }
  return p;
}

struct IsigSource {
  std::string name;
  std::optional<std::array<double, kImpactStates>> probs;
  std::string mc_dir;  // resolved against the scenario file
  std::string query;
  bool per_replication = false;
};

struct IsigSpec {
  std::vector<double> volumes = volume_range(500, 2000, 100);
  std::size_t seeds = 10;
  double duration = 3600.0;
  NetworkConfig grid;
  std::vector<IsigSource> scenarios;  // empty: the default sensor vectors
};

struct CaccSpec {
  std::size_t seeds = 10;
  std::vector<NormalSpec> lows = default_lows();
  AttackProfile profile;
  PlatoonConfig platoon;
  bool densities = true;
  bool trajectory = false;
};

struct Scenario {
  std::string name = "run";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  McConfig mc;
  bool has_mc = false;
  IsigSpec isig;
  CaccSpec cacc;
  json raw = json::object();
  fs::path base = ".";  // directory of the scenario file
};

inline Scenario parse_scenario(const json& doc, const fs::path& base) {
  Scenario s;
  s.raw = doc;
  s.base = base;
  allow_keys(doc, {"name", "seed", "out", "model", "mc", "isig", "cacc"}, "scenario");
  s.name = get_or<std::string>(doc, "name", s.name, "scenario");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw Error(ErrorKind::InvalidConfig, "seed must be a non-negative integer");
    s.seed = doc["seed"].get<std::uint64_t>();
  }
  s.out = get_or<std::string>(doc, "out", "", "scenario");
  s.model = get_or<std::string>(doc, "model", "", "scenario");

  if (doc.contains("mc")) {
    const json& m = doc["mc"];
    allow_keys(m, {"cycles", "replications", "mode", "queries", "evidence"}, "mc");
    s.has_mc = true;
    s.mc.cycles = get_or<std::size_t>(m, "cycles", s.mc.cycles, "mc");
    s.mc.replications = get_or<std::size_t>(m, "replications", 0, "mc");
    s.mc.mode = parse_randomization(get_or<std::string>(m, "mode", "per-cycle", "mc"));
    s.mc.queries = get_or<std::vector<std::string>>(m, "queries", {}, "mc");
    s.mc.evidence = get_or<std::map<std::string, std::string>>(m, "evidence", {}, "mc");
  }

  if (doc.contains("isig")) {
    const json& j = doc["isig"];
    allow_keys(j, {"volumes", "seeds", "duration", "signal", "grid", "scenarios"}, "isig");
    IsigSpec& x = s.isig;
    if (j.contains("volumes")) x.volumes = parse_volumes(j["volumes"]);
    x.seeds = get_or<std::size_t>(j, "seeds", x.seeds, "isig");
    x.duration = get_or<double>(j, "duration", x.duration, "isig");
    if (j.contains("signal")) {
      const json& g = j["signal"];
      allow_keys(g, {"green", "cycle", "base_service"}, "isig.signal");
      x.grid.signal.green = get_or<double>(g, "green", x.grid.signal.green, "isig.signal");
      x.grid.signal.cycle = get_or<double>(g, "cycle", x.grid.signal.cycle, "isig.signal");
      x.grid.signal.base_service = get_or<double>(g, "base_service", x.grid.signal.base_service, "isig.signal");
    }
    if (j.contains("grid")) {
      const json& g = j["grid"];
      allow_keys(g, {"rows", "cols", "travel_mean", "straight", "turn"}, "isig.grid");
      x.grid.rows = get_or<std::size_t>(g, "rows", x.grid.rows, "isig.grid");
      x.grid.cols = get_or<std::size_t>(g, "cols", x.grid.cols, "isig.grid");
      x.grid.travel_mean = get_or<double>(g, "travel_mean", x.grid.travel_mean, "isig.grid");
      x.grid.straight = get_or<double>(g, "straight", x.grid.straight, "isig.grid");
      x.grid.turn = get_or<double>(g, "turn", x.grid.turn, "isig.grid");
    }
    if (j.contains("scenarios")) {
      if (!j["scenarios"].is_array()) throw Error(ErrorKind::InvalidConfig, "isig.scenarios must be a list");
      for (const auto& e : j["scenarios"]) {
        allow_keys(e, {"name", "probs", "mc", "query", "per_replication"}, "isig.scenarios");
        IsigSource src;
        src.name = get_or<std::string>(e, "name", "", "isig.scenarios");
        if (src.name.empty() || src.name == "baseline")
          throw Error(ErrorKind::InvalidConfig, "isig scenario needs a name other than 'baseline'");
        if (e.contains("probs") == e.contains("mc"))
          throw Error(ErrorKind::InvalidConfig, "isig scenario '" + src.name + "' needs exactly one of probs or mc");
        if (e.contains("probs")) src.probs = parse_probs(e["probs"], "isig scenario '" + src.name + "'");
        if (e.contains("mc")) {
          src.mc_dir = (base / e["mc"].get<std::string>()).lexically_normal().string();
          src.query = get_or<std::string>(e, "query", "", "isig.scenarios");
          src.per_replication = get_or<bool>(e, "per_replication", false, "isig.scenarios");
        }
        x.scenarios.push_back(src);
      }
    }
  }

  if (doc.contains("cacc")) {
    const json& j = doc["cacc"];
    allow_keys(j, {"seeds", "lows", "probs", "episode_mean", "horizon", "platoons", "vehicles", "desired_kmh",
                   "densities", "trajectory"},
               "cacc");
    CaccSpec& c = s.cacc;
    c.seeds = get_or<std::size_t>(j, "seeds", c.seeds, "cacc");
    if (j.contains("lows")) {
      c.lows.clear();
      for (const auto& l : get_or<std::vector<std::string>>(j, "lows", {}, "cacc")) c.lows.push_back(parse_normal(l));
    }
    if (j.contains("probs")) c.profile.probs = parse_probs(j["probs"], "cacc");
    c.platoon.episode_mean = get_or<double>(j, "episode_mean", c.platoon.episode_mean, "cacc");
    c.platoon.horizon = get_or<double>(j, "horizon", c.platoon.horizon, "cacc");
    c.platoon.platoons = get_or<std::size_t>(j, "platoons", c.platoon.platoons, "cacc");
    c.platoon.vehicles = get_or<std::size_t>(j, "vehicles", c.platoon.vehicles, "cacc");
    c.platoon.desired_kmh = get_or<double>(j, "desired_kmh", c.platoon.desired_kmh, "cacc");
    c.densities = get_or<bool>(j, "densities", c.densities, "cacc");
    c.trajectory = get_or<bool>(j, "trajectory", c.trajectory, "cacc");
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
  return parse_scenario(doc, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Perturbations handed over from a Monte Carlo output directory

inline std::array<double, kImpactStates> probs_from_row(const std::vector<std::string>& row, std::size_t first) {
  std::array<double, kImpactStates> p{};
  for (std::size_t k = 0; k < kImpactStates; ++k) p[k] = std::stod(row.at(first + k));
  return p;
}

/// Mean state vector of a query from <dir>/mc.json.
inline std::array<double, kImpactStates> mc_mean_probs(const std::string& dir, const std::string& query) {
  const fs::path p = fs::path(dir) / "mc.json";
  if (!fs::exists(p)) throw Error(ErrorKind::InvalidConfig, "no Monte Carlo output at " + p.string());
  const json doc = json::parse(read_file(p));
  const json& qs = doc.at("summary").at("queries");
  for (const auto& q : qs)
    if (query.empty() || q.at("query") == query) return parse_probs(q.at("probs"), p.string());
  throw Error(ErrorKind::UnknownVariable, query + " (not in " + p.string() + ")");
}

/// One state vector per successful replication, from <dir>/replications.csv.
inline std::vector<std::array<double, kImpactStates>> mc_replication_probs(const std::string& dir,
                                                                           const std::string& query) {
  const fs::path p = fs::path(dir) / "replications.csv";
  if (!fs::exists(p)) throw Error(ErrorKind::InvalidConfig, "per-replication hand-off needs " + p.string());
  const auto rows = parse_csv(read_file(p));
  std::vector<std::array<double, kImpactStates>> out;
  std::string want = query;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 7) throw Error(ErrorKind::ParseError, p.string() + ": short row");
    if (want.empty()) want = rows[i][1];
    if (rows[i][1] == want) out.push_back(probs_from_row(rows[i], 2));
  }
  if (out.empty()) throw Error(ErrorKind::UnknownVariable, want + " (not in " + p.string() + ")");
  return out;
}

}  // namespace cvbn::cli
