// cvbn: command-line front end.
//
// Exit codes
//   0  success
//   1  internal error
//   2  validation error (bad flags, scenario, model, variable or state)
//   3  inconsistent evidence
//   4  more than 20% of Monte Carlo replications failed
//   5  simulator error (collision); diagnostics written to the output dir
//   6  corrupt manifest or output hash mismatch

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include "cvbn/bn_io.hpp"
#include "cvbn/inference.hpp"
#include "cvbn/model_zoo.hpp"
#include "manifest.hpp"
#include "scenario.hpp"

namespace cvbn::cli {
namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 1;
  std::string format = "csv";
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InconsistentEvidence: return 3;
    case ErrorKind::ReplicationsFailed: return 4;
    case ErrorKind::CollisionDetected:
    case ErrorKind::NonPositiveGap: return 5;
    case ErrorKind::CorruptManifest: return 6;
    default: return 2;
  }
}

std::uint64_t require_seed(const Globals& g, const Scenario* s) {
  if (g.seed) return *g.seed;
  if (s && s->seed) return *s->seed;
  throw Error(ErrorKind::InvalidConfig, "a seed is mandatory (--seed or \"seed\" in the scenario)");
}

fs::path out_dir(const Globals& g, const Scenario* s, const std::string& fallback) {
  if (!g.out.empty()) return g.out;
  if (s && !s->out.empty()) return (s->base / s->out).lexically_normal();
  return fallback;
}

// ---------------------------------------------------------------------------
// Tables: built as CSV text, optionally converted to JSON rows.

json csv_to_json(const std::string& text) {
  const auto rows = parse_csv(text);
  json out = json::array();
  if (rows.empty()) return out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    json obj = json::object();
    for (std::size_t c = 0; c < rows[0].size() && c < rows[i].size(); ++c) {
      const std::string& f = rows[i][c];
      if (f.empty()) {
        obj[rows[0][c]] = nullptr;
        continue;
      }
      const bool digits = f.find_first_not_of("0123456789") == std::string::npos;
      if (digits && f.size() < 20) {
        obj[rows[0][c]] = std::stoull(f);
        continue;
      }
      char* end = nullptr;
      const double x = std::strtod(f.c_str(), &end);
      if (end && *end == '\0' && std::isfinite(x))
        obj[rows[0][c]] = x;
      else
        obj[rows[0][c]] = f;
    }
    out.push_back(std::move(obj));
  }
  return out;
}

template <class F>
void emit_table(RunRecord& run, const Globals& g, const std::string& stem, F&& write) {
  std::ostringstream os;
  write(os);
  if (g.format == "json")
    run.write(stem + ".json", csv_to_json(os.str()).dump(2) + "\n");
  else
    run.write(stem + ".csv", os.str());
}

// ---------------------------------------------------------------------------
// Model lookup: CVBN_MODEL_PATH (':'-separated), then the shipped models/,
// then the built-in zoo.

std::vector<fs::path> model_search_path() {
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("CVBN_MODEL_PATH"); env && *env) {
    std::string s = env;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const auto c = s.find(':', pos);
      const std::string d = s.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
      if (!d.empty()) dirs.emplace_back(d);
      if (c == std::string::npos) break;
      pos = c + 1;
    }
  }
#ifdef CVBN_MODELS_DIR
  dirs.emplace_back(CVBN_MODELS_DIR);
#endif
  return dirs;
}

BayesNet load_model(const std::string& ref) {
  if (ref.size() > 5 && ref.ends_with(".json") && fs::exists(ref)) return load_network_file(ref);
  for (const auto& d : model_search_path())
    if (fs::exists(d / (ref + ".json"))) return load_network_file((d / (ref + ".json")).string());
  return build_model(parse_model_ref(ref));
}

Evidence parse_evidence(const BayesNet& net, const std::vector<std::string>& items) {
  Evidence ev;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw Error(ErrorKind::InvalidConfig, "evidence must look like VAR=state, got '" + item + "'");
    const std::size_t v = resolve_variable(net, item.substr(0, eq));
    ev.set(v, net.state_index(v, item.substr(eq + 1)));
  }
  return ev;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string model;
  std::string query;
  std::vector<std::string> evidence;
  std::string table;
};

int cmd_infer(const Globals& g, const InferArgs& a) {
  const BayesNet net = load_model(a.model);
  const std::size_t q = resolve_variable(net, a.query);
  const Evidence ev = parse_evidence(net, a.evidence);
  const auto& qvar = net.variable(q);
  std::ostringstream os;
  if (a.table.empty()) {
    const Distribution d = eliminate(net, q, ev);
    os << "variable,state,p\n";
    for (std::size_t k = 0; k < d.size(); ++k)
      os << (CsvRow() << qvar.id << qvar.states[k] << d[k]).str() << '\n';
  } else {
    const std::size_t given = resolve_variable(net, a.table);
    if (!ev.empty()) throw Error(ErrorKind::InvalidConfig, "--table does not take --evidence");
    const auto rows = conditional_table(net, q, given);
    CsvRow head;
    head << net.variable(given).id;
    for (const auto& s : qvar.states) head << s;
    os << head.str() << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
      CsvRow row;
      row << net.variable(given).states[r];
      for (double p : rows[r].probs) row << p;
      os << row.str() << '\n';
    }
  }
  const std::string text = g.format == "json" ? csv_to_json(os.str()).dump(2) + "\n" : os.str();
  if (g.out.empty()) {
    std::cout << text;
  } else {
    json cfg = {{"model", a.model}, {"query", a.query}, {"evidence", a.evidence}, {"table", a.table}};
    RunRecord run(g.out, "infer", a.model + ":" + qvar.id, cfg, g.seed.value_or(0));
    run.write(g.format == "json" ? "infer.json" : "infer.csv", text);
    run.finish("ok");
    std::cout << text;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// mc

int cmd_mc(const Globals& g, const std::string& path) {
  const Scenario s = load_scenario(path);
  if (s.model.empty()) throw Error(ErrorKind::InvalidConfig, "mc scenario needs \"model\"");
  McConfig c = s.mc;
  c.model = parse_model_ref(s.model);
  c.seed = require_seed(g, &s);
  c.workers = g.workers;
  const MonteCarlo mc(c);
  const McResult res = mc.run();

  json cfg = s.raw;
  cfg["seed"] = c.seed;
  cfg["replications_resolved"] = replication_count(c);
  RunRecord run(out_dir(g, &s, "out"), "mc", s.name, cfg, c.seed);
  emit_table(run, g, "replications", [&](std::ostream& os) { write_replications_csv(os, res.replications); });
  std::size_t failed = 0;
  for (const auto& r : res.replications) failed += !r.ok;
  if (failed) emit_table(run, g, "failures", [&](std::ostream& os) { write_failures_csv(os, res.replications); });
  if (!res.summary) {
    run.finish("replications-failed");
    throw Error(ErrorKind::ReplicationsFailed, res.failure + " (see " + (run.dir() / (g.format == "json" ? "failures.json" : "failures.csv")).string() + ")");
  }
  const Summary& sum = *res.summary;
  emit_table(run, g, "summary", [&](std::ostream& os) { write_summary_csv(os, sum); });
  for (const auto& q : sum.queries)
    emit_table(run, g, "quantiles_" + q.query, [&](std::ostream& os) { write_quantiles_csv(os, q); });
  json doc;
  doc["summary"] = summary_json(sum);
  run.write("mc.json", doc.dump(2) + "\n");
  run.finish("ok");

  for (const auto& q : sum.queries)
    std::cout << q.query << ": mean " << fmt_num(q.score_mean) << " sd " << fmt_num(q.score_sd_pooled) << " CI ["
              << fmt_num(q.interval.lo) << ", " << fmt_num(q.interval.hi) << "] p_none " << fmt_num(q.probs[0])
              << '\n';
  std::cout << "wrote " << run.dir().string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sim

struct SimArgs {
  std::string which;
  std::string scenario;
  std::string volumes;
  std::string sensor;  // on | off | both
  std::vector<std::string> lows;
  std::optional<std::size_t> seeds;
  std::optional<double> duration;
  std::optional<double> episode_mean;
  bool trajectory = false;
  bool per_replication = false;
};

std::vector<std::uint64_t> run_seeds(std::uint64_t master, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidConfig, "need at least one seed");
  std::vector<std::uint64_t> v;
  for (std::size_t k = 0; k < n; ++k) v.push_back(derive_seed(master, stream_tag("sim-seeds"), k));
  return v;
}

int sim_isig(const Globals& g, const SimArgs& a, Scenario& s, std::uint64_t seed) {
  IsigSpec& x = s.isig;
  if (!a.volumes.empty()) x.volumes = parse_volumes(json(a.volumes));
  if (a.seeds) x.seeds = *a.seeds;
  if (a.duration) x.duration = *a.duration;

  ScanConfig c;
  c.network = a.which == "isig-network";
  c.grid = x.grid;
  c.volumes = x.volumes;
  c.duration = x.duration;
  c.seeds = run_seeds(seed, x.seeds);
  c.workers = g.workers;
  c.scenarios = {{"baseline", std::nullopt, {}}};
  json sources = json::array();
  if (x.scenarios.empty()) {
    const auto defaults = default_scenarios();
    const std::string sensor = a.sensor.empty() ? "both" : a.sensor;
    if (sensor != "on" && sensor != "off" && sensor != "both")
      throw Error(ErrorKind::InvalidConfig, "--sensor must be on, off or both");
    if (sensor != "off") c.scenarios.push_back(defaults[1]);
    if (sensor != "on") c.scenarios.push_back(defaults[2]);
  } else {
    if (!a.sensor.empty()) throw Error(ErrorKind::InvalidConfig, "--sensor picks default vectors; the scenario lists its own");
    for (const auto& src : x.scenarios) {
      SimScenario sc;
      sc.name = src.name;
      json info = {{"name", src.name}};
      if (src.probs) {
        sc.perturbation = make_perturbation(std::span<const double>(*src.probs));
        info["probs"] = *src.probs;
      } else if (src.per_replication || a.per_replication) {
        for (const auto& p : mc_replication_probs(src.mc_dir, src.query))
          sc.per_seed.push_back(make_perturbation(std::span<const double>(p)));
        sc.perturbation = sc.per_seed.front();
        info["mc"] = src.mc_dir;
        info["per_replication"] = sc.per_seed.size();
      } else {
        const auto p = mc_mean_probs(src.mc_dir, src.query);
        sc.perturbation = make_perturbation(std::span<const double>(p));
        info["mc"] = src.mc_dir;
        info["probs"] = p;
      }
      sources.push_back(info);
      c.scenarios.push_back(std::move(sc));
    }
  }

  const ScanResult res = saturation_scan(c);
  if (!res.conserved) throw Error(ErrorKind::InvalidConfig, "flow conservation violated");
  json cfg = s.raw;
  cfg["command"] = a.which;
  cfg["seed"] = seed;
  cfg["volumes_resolved"] = c.volumes;
  cfg["seeds_resolved"] = c.seeds;
  cfg["duration_resolved"] = c.duration;
  cfg["scenarios_resolved"] = sources;
  cfg["sensor"] = a.sensor;
  RunRecord run(out_dir(g, &s, "out"), "sim " + a.which, s.name, cfg, seed);
  emit_table(run, g, "sim", [&](std::ostream& os) { write_sim_csv(os, res.rows); });
  emit_table(run, g, "deltas", [&](std::ostream& os) { write_sim_deltas_csv(os, res.deltas); });
  run.finish("ok");
  for (const auto& d : res.deltas)
    std::cout << d.scenario << ": delay " << fmt_num(d.pct.avg_delay) << "% queue " << fmt_num(d.pct.avg_queue)
              << "% max queue " << fmt_num(d.pct.max_queue) << "% (abs delay " << fmt_num(d.abs.avg_delay)
              << " s)\n";
  std::cout << "wrote " << run.dir().string() << '\n';
  return 0;
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')
      out += c;
    else if (c == ',')
      out += '_';
  }
  return out;
}

int sim_cacc(const Globals& g, const SimArgs& a, Scenario& s, std::uint64_t seed) {
  CaccSpec& x = s.cacc;
  if (!a.lows.empty()) {
    x.lows.clear();
    for (const auto& l : a.lows) x.lows.push_back(parse_normal(l));
  }
  if (a.seeds) x.seeds = *a.seeds;
  if (a.duration) x.platoon.horizon = *a.duration;
  if (a.episode_mean) x.platoon.episode_mean = *a.episode_mean;
  if (a.trajectory) x.trajectory = true;

  const auto seeds = run_seeds(seed, x.seeds);
  const auto variants = table_variants(x.lows, x.profile);
  const SweepResult res = attack_sweep(x.platoon, variants, seeds, g.workers);

  json cfg = s.raw;
  cfg["command"] = a.which;
  cfg["seed"] = seed;
  cfg["seeds_resolved"] = seeds;
  json lows = json::array();
  for (const auto& l : x.lows) lows.push_back(to_string(l));
  cfg["lows_resolved"] = lows;
  cfg["episode_mean_resolved"] = x.platoon.episode_mean;
  cfg["horizon_resolved"] = x.platoon.horizon;
  RunRecord run(out_dir(g, &s, "out"), "sim cacc", s.name, cfg, seed);
  emit_table(run, g, "cacc_table", [&](std::ostream& os) { write_cacc_table_csv(os, res.rows); });
  emit_table(run, g, "cacc_runs", [&](std::ostream& os) { write_cacc_runs_csv(os, res.runs); });

  // densities and trajectories come from the first seed of each variant
  if (x.densities || x.trajectory) {
    PlatoonConfig pc = x.platoon;
    pc.keep_samples = x.densities;
    std::ostringstream dens;
    write_density_header(dens);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (!res.runs[v * seeds.size()].ok) continue;
      TrajectorySink tr;
      const CaccResult r = run_scenario(pc, variants[v].profile, seeds[0], x.trajectory ? &tr : nullptr);
      if (x.densities) write_cacc_density_csv(dens, variants[v].name, r);
      if (x.trajectory)
        emit_table(run, g, "trajectory_" + file_safe(variants[v].name),
                   [&](std::ostream& os) { write_trajectory_csv(os, tr); });
    }
    if (x.densities) emit_table(run, g, "cacc_density", [&](std::ostream& os) { os << dens.str(); });
  }

  std::string errors;
  for (const auto& r : res.runs)
    if (!r.ok) errors += r.variant + " seed " + std::to_string(r.seed) + ": " + r.error + "\n";
  if (!errors.empty()) run.write("diagnostics.txt", errors);
  run.finish(errors.empty() ? "ok" : "simulator-error");

  for (const auto& r : res.rows)
    std::cout << r.variant << ": avg delay " << fmt_num(r.avg_delay) << " s, speed " << fmt_num(r.avg_speed)
              << " km/h, stops " << fmt_num(r.stops) << ", total delay " << fmt_num(r.total_delay) << " s"
              << (r.pct_diff ? ", " + fmt_num(*r.pct_diff) + "%" : std::string()) << '\n';
  std::cout << "wrote " << run.dir().string() << '\n';
  if (!errors.empty())
    throw Error(ErrorKind::CollisionDetected, "simulator errors, see " + (run.dir() / "diagnostics.txt").string());
  return 0;
}

int cmd_sim(const Globals& g, const SimArgs& a) {
  Scenario s;
  if (!a.scenario.empty()) s = load_scenario(a.scenario);
  s.name = s.name == "run" ? a.which : s.name;
  const std::uint64_t seed = require_seed(g, &s);
  if (a.which == "isig-isolated" || a.which == "isig-network") return sim_isig(g, a, s, seed);
  if (a.which == "cacc") return sim_cacc(g, a, s, seed);
  throw Error(ErrorKind::InvalidConfig, "unknown simulator '" + a.which + "'");
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const Globals& g, const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::InvalidConfig, "not a directory: " + dir);
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "manifest.json") manifests.push_back(e.path());
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) throw Error(ErrorKind::InvalidConfig, "no manifests under " + dir);

  std::vector<json> good;
  std::string problems;
  for (const auto& m : manifests) {
    try {
      good.push_back(verify_manifest(m));
    } catch (const Error& e) {
      problems += std::string(e.what()) + "\n";
    }
  }
  if (!problems.empty()) {
    std::cerr << problems;
    throw Error(ErrorKind::CorruptManifest, std::to_string(manifests.size() - good.size()) + " of " +
                                                std::to_string(manifests.size()) + " manifests failed verification");
  }

  json report;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["runs"] = json::array();
  // plot data: one CSV per table kind, rows prefixed by the run directory
  std::map<std::string, std::pair<std::vector<std::string>, std::string>> plots;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const json& m = good[i];
    const fs::path rdir = manifests[i].parent_path();
    const std::string rel = fs::relative(rdir, dir).generic_string();
    json entry = {{"dir", rel},           {"command", m["command"]}, {"name", m.value("name", "")},
                  {"seed", m["seed"]},     {"config", m["config"]},   {"config_hash", m["config_hash"]},
                  {"status", m.value("status", "")}, {"files", json::object()}};
    for (const auto& f : m["files"]) {
      const std::string name = f["path"];
      const std::string text = read_file(rdir / name);
      const fs::path fp(name);
      json content;
      if (name.starts_with("trajectory_")) {
        content = {{"sha256", f["sha256"]}, {"bytes", f.value("bytes", 0)}};
      } else if (fp.extension() == ".csv") {
        content = csv_to_json(text);
        std::string stem = fp.stem().string(), extra;
        if (stem.starts_with("quantiles_")) {
          extra = stem.substr(10);
          stem = "quantiles";
        }
        const auto rows = parse_csv(text);
        if (rows.empty()) continue;
        std::vector<std::string> head{"run"};
        if (!extra.empty() || stem == "quantiles") head.push_back("query");
        head.insert(head.end(), rows[0].begin(), rows[0].end());
        auto& [h, body] = plots[stem];
        if (h.empty()) h = head;
        if (h != head) continue;  // same name, different columns: left out of the merged plot file
        for (std::size_t r = 1; r < rows.size(); ++r) {
          CsvRow row;
          row << rel;
          if (stem == "quantiles") row << extra;
          for (const auto& x : rows[r]) row << x;
          body += row.str() + "\n";
        }
      } else if (fp.extension() == ".json") {
        content = json::parse(text);
      } else {
        content = text;
      }
      entry["files"][name] = content;
    }
    report["runs"].push_back(std::move(entry));
  }

  const fs::path out = g.out.empty() ? fs::path(dir) : fs::path(g.out);
  fs::create_directories(out);
  {
    std::ofstream f(out / "report.json");
    f << report.dump(2) << '\n';
  }
  for (const auto& [stem, hb] : plots) {
    std::ofstream f(out / ("plot_" + stem + ".csv"));
    CsvRow head;
    for (const auto& h : hb.first) head << h;
    f << head.str() << '\n' << hb.second;
  }
  std::cout << "verified " << manifests.size() << " run(s); wrote " << (out / "report.json").string() << " and "
            << plots.size() << " plot file(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// validate

const std::vector<std::string> kShippedModels = {"cacc", "cacc10", "isig", "isig-nosensor", "isig-pattern8"};

int cmd_validate(const Globals& g, const std::vector<std::string>& scenarios, bool regenerate,
                 const std::string& models_dir) {
  if (!scenarios.empty()) {
    for (const auto& p : scenarios) {
      const Scenario s = load_scenario(p);
      require_seed(g, &s);
      if (!s.model.empty()) (void)parse_model_ref(s.model);
      if (s.has_mc && s.model.empty()) throw Error(ErrorKind::InvalidConfig, p + ": mc needs \"model\"");
      for (const auto& src : s.isig.scenarios)
        if (!src.mc_dir.empty() && !fs::exists(fs::path(src.mc_dir) / "mc.json"))
          throw Error(ErrorKind::InvalidConfig, p + ": missing Monte Carlo output " + src.mc_dir);
      std::cout << p << ": ok\n";
    }
    return 0;
  }

  (void)load_attack_surfaces();
  (void)load_node_metrics("cacc");
  (void)load_node_metrics("isig");
  (void)load_topology("cacc");
  (void)load_topology("isig");
  std::cout << "data files: ok (" << data_dir() << ")\n";

  fs::path dir = models_dir;
#ifdef CVBN_MODELS_DIR
  if (dir.empty()) dir = CVBN_MODELS_DIR;
#endif
  if (dir.empty()) throw Error(ErrorKind::InvalidConfig, "no models directory");
  std::size_t bad = 0;
  for (const auto& ref : kShippedModels) {
    const std::string text = save_network(build_model(parse_model_ref(ref)));
    const fs::path p = dir / (ref + ".json");
    if (regenerate) {
      fs::create_directories(dir);
      std::ofstream(p, std::ios::binary) << text;
      std::cout << p.string() << ": written\n";
      continue;
    }
    if (!fs::exists(p)) {
      std::cout << p.string() << ": missing\n";
      ++bad;
      continue;
    }
    const BayesNet loaded = load_network_file(p.string());  // structural and row checks
    const bool same = read_file(p) == text;
    std::cout << p.string() << ": " << loaded.size() << " variables, " << (same ? "matches the zoo" : "DIFFERS from the zoo")
              << '\n';
    bad += !same;
  }
  (void)g;
  if (bad) throw Error(ErrorKind::InvalidConfig, std::to_string(bad) + " model file(s) missing or stale; rerun with --regenerate");
  return 0;
}

}  // namespace
}  // namespace cvbn::cli

int main(int argc, char** argv) {
  using namespace cvbn::cli;
  CLI::App app{"Bayesian-network vulnerability analysis, Monte Carlo and traffic impact simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed (mandatory for mc and sim)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "table format")->check(CLI::IsMember({"csv", "json"}));

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "posterior of one variable");
  infer->add_option("--model", ia.model, "model reference or .json file")->required();
  infer->add_option("--query", ia.query, "variable id")->required();
  infer->add_option("--evidence,-e", ia.evidence, "VAR=state (repeatable)")->delimiter(',');
  infer->add_option("--table", ia.table, "emit P(query | GIVEN) for every state of GIVEN");

  std::string mc_path;
  auto* mc = app.add_subcommand("mc", "Monte Carlo uncertainty run from a scenario file");
  mc->add_option("scenario", mc_path, "scenario JSON")->required();

  SimArgs sa;
  auto* sim = app.add_subcommand("sim", "traffic impact simulation");
  sim->add_option("which", sa.which, "isig-isolated | isig-network | cacc")
      ->required()
      ->check(CLI::IsMember({"isig-isolated", "isig-network", "cacc"}));
  sim->add_option("scenario", sa.scenario, "scenario JSON (optional)");
  sim->add_option("--volumes", sa.volumes, "lo:hi:step vph per approach");
  sim->add_option("--volume", sa.volumes, "single volume (vph per approach)");
  sim->add_option("--sensor", sa.sensor, "on | off | both (default vectors)");
  sim->add_option("--low", sa.lows, "low-state perturbation N(mean,sd) in km/h (repeatable)");
  sim->add_option("--seeds", sa.seeds, "number of seeds");
  sim->add_option("--duration,--horizon", sa.duration, "simulated horizon (s)");
  sim->add_option("--episode-mean", sa.episode_mean, "CACC: mean attack episode length (s); 0 = per message");
  sim->add_flag("--trajectory", sa.trajectory, "CACC: write 0.1 s trajectory logs");
  sim->add_flag("--per-replication", sa.per_replication, "use per-replication vectors from Monte Carlo outputs");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "merge and verify run outputs");
  report->add_option("dir", report_dir, "directory holding run outputs")->required();

  std::vector<std::string> validate_files;
  bool regenerate = false;
  std::string models_dir;
  auto* validate = app.add_subcommand("validate", "check data files, shipped models or scenario files");
  validate->add_option("scenarios", validate_files, "scenario files to check");
  validate->add_flag("--regenerate", regenerate, "rewrite the shipped model files");
  validate->add_option("--models", models_dir, "models directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*infer) return cmd_infer(g, ia);
    if (*mc) return cmd_mc(g, mc_path);
    if (*sim) return cmd_sim(g, sa);
    if (*report) return cmd_report(g, report_dir);
    if (*validate) return cmd_validate(g, validate_files, regenerate, models_dir);
  } catch (const cvbn::Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
