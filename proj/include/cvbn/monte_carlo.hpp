#pragma once

// Replicated Monte Carlo over metric draws. One cycle = one draw of every
// metric weight, one synthesis of all CPTs and one exact inference pass per
// query. Replication r draws from derive_seed(master, tag("mc-replication"), r)
// so results do not depend on worker count or scheduling.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cvbn/csv.hpp"
#include "cvbn/cvss.hpp"
#include "cvbn/error.hpp"
#include "cvbn/inference.hpp"
#include "cvbn/model_zoo.hpp"
#include "cvbn/rng.hpp"

namespace cvbn {

enum class Randomization { PerCycle, PerReplication, Fixed };

inline std::string_view to_string(Randomization m) {
  switch (m) {
    case Randomization::PerCycle: return "per-cycle";
    case Randomization::PerReplication: return "per-replication";
    case Randomization::Fixed: return "fixed";
  }
  return "";
}

inline Randomization parse_randomization(std::string_view s) {
  if (s == "per-cycle") return Randomization::PerCycle;
  if (s == "per-replication") return Randomization::PerReplication;
  if (s == "fixed") return Randomization::Fixed;
  throw Error(ErrorKind::InvalidConfig, "unknown randomization mode '" + std::string(s) + "'");
}

struct McConfig {
  ModelSpec model;
  std::size_t cycles = 10000;
  std::size_t replications = 0;  // 0: 200 for signal models, 50 for CACC
  Randomization mode = Randomization::PerCycle;
  std::uint64_t seed = 0;
  std::vector<std::string> queries;  // empty: every sink plus the aggregate
  std::map<std::string, std::string> evidence;
  std::size_t workers = 1;
  std::string data_dir;  // empty: data_dir()
};

inline std::size_t default_replications(const ModelSpec& spec) {
  return spec.kind == ModelKind::Isig || spec.kind == ModelKind::IsigPattern ? 200 : 50;
}

inline std::size_t replication_count(const McConfig& c) {
  return c.replications ? c.replications : default_replications(c.model);
}

struct QueryStats {
  std::string query;
  std::array<double, kImpactStates> probs{};
  double score_mean = 0.0;
  double score_sd = 0.0;
};

struct ReplicationStats {
  std::size_t rep = 0;
  bool ok = true;
  std::string error;
  std::vector<QueryStats> queries;
};

struct Quantiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quantiles (R type 7).
inline Quantiles quantiles(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), at(0.25), at(0.5), at(0.75), v.back()};
}

/// Counts of per-cycle score means on a 0.001 grid over [0, 10].
struct ScoreHistogram {
  static constexpr std::size_t kBins = 10001;
  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kBins, 0);

  void add(double score, std::uint64_t n = 1) {
    const long b = std::lround(std::clamp(score, 0.0, 10.0) * 1000.0);
    counts[static_cast<std::size_t>(b)] += n;
  }
  void merge(const ScoreHistogram& o) {
    for (std::size_t i = 0; i < kBins; ++i) counts[i] += o.counts[i];
  }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  Quantiles quantiles() const {
    const std::uint64_t n = total();
    if (n == 0) return {};
    auto value_at = [&](std::uint64_t k) {  // k-th order statistic, 0-based
      std::uint64_t seen = 0;
      for (std::size_t i = 0; i < kBins; ++i) {
        seen += counts[i];
        if (seen > k) return static_cast<double>(i) / 1000.0;
      }
      return 10.0;
    };
    auto at = [&](double p) {
      const double h = p * static_cast<double>(n - 1);
      const auto lo = static_cast<std::uint64_t>(std::floor(h));
      const double a = value_at(lo);
      const double b = value_at(std::min(lo + 1, n - 1));
      return a + (h - static_cast<double>(lo)) * (b - a);
    };
    return {at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)};
  }
};

struct QuerySummary {
  std::string query;
  std::array<double, kImpactStates> probs{};  // mean of replication means
  double score_mean = 0.0;       // mean of replication score means
  double score_sd = 0.0;         // mean of replication score sds
  double between_sd = 0.0;       // population sd of replication score means
  double score_sd_pooled = 0.0;  // sqrt(mean(sd^2) + between_sd^2)
  Interval interval;             // score_mean +- 2 * score_sd_pooled, clamped
  Quantiles replication_scores;
  Quantiles cycle_scores;
  std::array<Quantiles, kImpactStates> replication_probs{};
};

struct Summary {
  std::string model;
  Randomization mode = Randomization::PerCycle;
  std::uint64_t seed = 0;
  std::size_t cycles = 0;
  std::size_t replications = 0;
  std::size_t succeeded = 0;
  std::vector<QuerySummary> queries;
};

struct McResult {
  std::vector<ReplicationStats> replications;
  std::vector<ScoreHistogram> cycle_histograms;  // one per query
  std::optional<Summary> summary;                // empty when too many replications failed
  std::string failure;
};

/// A summary needs at least 80% of replications to succeed.
inline bool enough_successes(std::size_t ok, std::size_t total) { return ok * 5 >= total * 4; }

/// Validated model, evidence and compiled queries, shared by all replications.
class MonteCarlo {
 public:
  explicit MonteCarlo(McConfig config)
      : config_(std::move(config)),
        template_(make_template(config_.model,
                                config_.data_dir.empty() ? data_dir() : config_.data_dir)) {
    if (config_.cycles < 1) throw Error(ErrorKind::InvalidConfig, "cycles must be at least 1");
    if (config_.replications == 0) config_.replications = default_replications(config_.model);
    if (config_.workers < 1) config_.workers = 1;
    const BayesNet& net = template_.network();
    for (const auto& [id, label] : config_.evidence)
      evidence_.set(resolve_variable(net, id), net.state_index(resolve_variable(net, id), label));
    if (config_.queries.empty()) {
      config_.queries = template_.sinks();
      if (!template_.aggregate().empty()) config_.queries.push_back(template_.aggregate());
    }
    for (const auto& q : config_.queries) {
      const std::size_t v = resolve_variable(net, q);
      if (net.cardinality(v) != kImpactStates)
        throw Error(ErrorKind::InvalidConfig, "query " + q + " is not a five-state impact node");
      names_.push_back(net.variable(v).id);
      compiled_.emplace_back(net, plan_query(net, v, evidence_), evidence_);
    }
  }

  const McConfig& config() const { return config_; }
  const ModelTemplate& model() const { return template_; }
  const std::vector<std::string>& query_names() const { return names_; }

  /// One replication; failures are captured in the result, not thrown.
  ReplicationStats run_replication(std::size_t r, std::vector<ScoreHistogram>* hist = nullptr) const {
    ReplicationStats out;
    out.rep = r;
    try {
      replicate(r, out, hist);
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
      out.queries.clear();
    }
    return out;
  }

  McResult run() const {
    const std::size_t n = config_.replications;
    McResult res;
    res.replications.resize(n);
    const std::size_t workers = std::min(config_.workers, n);
    std::vector<std::vector<ScoreHistogram>> hists(workers,
                                                   std::vector<ScoreHistogram>(names_.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&](std::size_t w) {
      std::vector<ScoreHistogram> local(names_.size());
      for (std::size_t r; (r = next.fetch_add(1)) < n;) {
        for (auto& h : local) std::fill(h.counts.begin(), h.counts.end(), 0);
        res.replications[r] = run_replication(r, &local);
        if (res.replications[r].ok)
          for (std::size_t q = 0; q < local.size(); ++q) hists[w][q].merge(local[q]);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    res.cycle_histograms.assign(names_.size(), ScoreHistogram{});
    for (const auto& hw : hists)
      for (std::size_t q = 0; q < names_.size(); ++q) res.cycle_histograms[q].merge(hw[q]);

    std::size_t ok = 0;
    for (const auto& r : res.replications) ok += r.ok;
    if (!enough_successes(ok, n)) {
      res.failure = std::to_string(n - ok) + " of " + std::to_string(n) + " replications failed";
      for (const auto& r : res.replications)
        if (!r.ok) {
          res.failure += "; first: replication " + std::to_string(r.rep) + ": " + r.error;
          break;
        }
    } else {
      res.summary = summarize(res.replications, res.cycle_histograms);
    }
    return res;
  }

  Summary summarize(const std::vector<ReplicationStats>& reps,
                    const std::vector<ScoreHistogram>& cycle_hist) const {
    Summary s;
    s.model = model_ref(config_.model);
    s.mode = config_.mode;
    s.seed = config_.seed;
    s.cycles = config_.cycles;
    s.replications = reps.size();
    for (std::size_t q = 0; q < names_.size(); ++q) {
      QuerySummary qs;
      qs.query = names_[q];
      std::vector<double> means, sds;
      std::array<std::vector<double>, kImpactStates> probs;
      for (const auto& r : reps) {
        if (!r.ok) continue;
        const QueryStats& st = r.queries[q];
        means.push_back(st.score_mean);
        sds.push_back(st.score_sd);
        for (std::size_t k = 0; k < kImpactStates; ++k) probs[k].push_back(st.probs[k]);
      }
      s.succeeded = means.size();
      if (means.empty()) continue;
      const double n = static_cast<double>(means.size());
      double m = 0.0, sd = 0.0, sd2 = 0.0;
      for (std::size_t i = 0; i < means.size(); ++i) {
        m += means[i];
        sd += sds[i];
        sd2 += sds[i] * sds[i];
      }
      m /= n;
      sd /= n;
      sd2 /= n;
      double var_between = 0.0;
      for (double x : means) var_between += (x - m) * (x - m);
      var_between /= n;
      qs.score_mean = m;
      qs.score_sd = sd;
      qs.between_sd = std::sqrt(var_between);
      qs.score_sd_pooled = std::sqrt(sd2 + var_between);
      qs.interval = confidence_interval(m, qs.score_sd_pooled);
      qs.replication_scores = quantiles(means);
      if (q < cycle_hist.size()) qs.cycle_scores = cycle_hist[q].quantiles();
      for (std::size_t k = 0; k < kImpactStates; ++k) {
        double p = 0.0;
        for (double x : probs[k]) p += x;
        qs.probs[k] = p / n;
        qs.replication_probs[k] = quantiles(probs[k]);
      }
      s.queries.push_back(std::move(qs));
    }
    return s;
  }

 private:
  void replicate(std::size_t r, ReplicationStats& out, std::vector<ScoreHistogram>* hist) const {
    const std::size_t nq = compiled_.size();
    std::vector<std::array<double, kImpactStates>> psum(nq);
    std::vector<double> msum(nq, 0.0), ssum(nq, 0.0);
    std::vector<std::vector<double>> tables;
    CompiledQuery::Workspace ws;
    std::vector<double> post;
    Rng rng(derive_seed(config_.seed, stream_tag("mc-replication"), r));

    auto cycle = [&](std::uint64_t weight) {
      for (std::size_t q = 0; q < nq; ++q) {
        compiled_[q].run(tables, ws, post);
        const VulnerabilityScore sc = vulnerability_score(post);
        const double w = static_cast<double>(weight);
        for (std::size_t k = 0; k < kImpactStates; ++k) psum[q][k] += w * post[k];
        msum[q] += w * sc.mean;
        ssum[q] += w * sc.sd;
        if (hist) (*hist)[q].add(sc.mean, weight);
      }
    };

    switch (config_.mode) {
      case Randomization::Fixed:
        tables.clear();
        for (const auto& f : template_.network().families()) tables.push_back(f.table);
        cycle(config_.cycles);
        break;
      case Randomization::PerReplication:
        template_.synthesize(SynthesisMode::Random, rng, tables);
        cycle(config_.cycles);
        break;
      case Randomization::PerCycle:
        for (std::size_t c = 0; c < config_.cycles; ++c) {
          template_.synthesize(SynthesisMode::Random, rng, tables);
          cycle(1);
        }
        break;
    }
    const double n = static_cast<double>(config_.cycles);
    for (std::size_t q = 0; q < nq; ++q) {
      QueryStats st;
      st.query = names_[q];
      for (std::size_t k = 0; k < kImpactStates; ++k) st.probs[k] = psum[q][k] / n;
      st.score_mean = msum[q] / n;
      st.score_sd = ssum[q] / n;
      out.queries.push_back(std::move(st));
    }
  }

  McConfig config_;
  ModelTemplate template_;
  Evidence evidence_;
  std::vector<std::string> names_;
  std::vector<CompiledQuery> compiled_;
};

inline ReplicationStats run_replication(const McConfig& config, std::size_t r) {
  return MonteCarlo(config).run_replication(r);
}

/// Throws ReplicationsFailed when fewer than 80% of replications succeed.
inline McResult run_mc(const McConfig& config) {
  McResult res = MonteCarlo(config).run();
  if (!res.summary) throw Error(ErrorKind::ReplicationsFailed, res.failure);
  return res;
}

struct ModeComparison {
  Summary first;   // per-replication randomization by default
  Summary second;  // per-cycle by default
  std::vector<double> width_ratio;  // interval width first / second, per query
};

inline ModeComparison compare_modes(McConfig config, Randomization a = Randomization::PerReplication,
                                    Randomization b = Randomization::PerCycle) {
  ModeComparison out;
  config.mode = a;
  out.first = *run_mc(config).summary;
  config.mode = b;
  out.second = *run_mc(config).summary;
  for (std::size_t q = 0; q < out.first.queries.size(); ++q) {
    const Interval& i1 = out.first.queries[q].interval;
    const Interval& i2 = out.second.queries[q].interval;
    const double w2 = i2.hi - i2.lo;
    out.width_ratio.push_back(w2 > 0.0 ? (i1.hi - i1.lo) / w2 : std::nan(""));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files

inline void write_replications_csv(std::ostream& os, const std::vector<ReplicationStats>& reps) {
  write_csv_header(os, {"rep", "query", "p_none", "p_low", "p_med", "p_high", "p_cri",
                        "score_mean", "score_sd"});
  for (const auto& r : reps) {
    if (!r.ok) continue;
    for (const auto& q : r.queries) {
      CsvRow row;
      row << r.rep << q.query;
      for (double p : q.probs) row << p;
      row << q.score_mean << q.score_sd;
      os << row.str() << '\n';
    }
  }
}

inline void write_failures_csv(std::ostream& os, const std::vector<ReplicationStats>& reps) {
  write_csv_header(os, {"rep", "error"});
  for (const auto& r : reps)
    if (!r.ok) os << (CsvRow() << r.rep << r.error).str() << '\n';
}

inline void write_summary_csv(std::ostream& os, const Summary& s) {
  write_csv_header(os, {"query", "model", "mode", "seed", "cycles", "replications", "succeeded",
                        "p_none", "p_low", "p_med", "p_high", "p_cri", "score_mean", "score_sd",
                        "between_sd", "score_sd_pooled", "ci_lo", "ci_hi"});
  for (const auto& q : s.queries) {
    CsvRow row;
    row << q.query << s.model << to_string(s.mode) << std::to_string(s.seed) << s.cycles
        << s.replications << s.succeeded;
    for (double p : q.probs) row << p;
    row << q.score_mean << q.score_sd << q.between_sd << q.score_sd_pooled << q.interval.lo
        << q.interval.hi;
    os << row.str() << '\n';
  }
}

/// Boxplot data for one query: score at replication and cycle granularity,
/// state probabilities at replication granularity.
inline void write_quantiles_csv(std::ostream& os, const QuerySummary& q) {
  write_csv_header(os, {"statistic", "granularity", "min", "q1", "median", "q3", "max"});
  auto line = [&](std::string_view stat, std::string_view gran, const Quantiles& x) {
    os << (CsvRow() << stat << gran << x.min << x.q1 << x.median << x.q3 << x.max).str() << '\n';
  };
  line("score", "replication", q.replication_scores);
  line("score", "cycle", q.cycle_scores);
  for (std::size_t k = 0; k < kImpactStates; ++k)
    line("p_" + kImpactLabels[k], "replication", q.replication_probs[k]);
}

inline nlohmann::json quantiles_json(const Quantiles& x) {
  return {{"min", x.min}, {"q1", x.q1}, {"median", x.median}, {"q3", x.q3}, {"max", x.max}};
}

inline nlohmann::json summary_json(const Summary& s) {
  nlohmann::json j;
  j["model"] = s.model;
  j["mode"] = std::string(to_string(s.mode));
  j["seed"] = s.seed;
  j["cycles"] = s.cycles;
  j["replications"] = s.replications;
  j["succeeded"] = s.succeeded;
  j["queries"] = nlohmann::json::array();
  for (const auto& q : s.queries) {
    nlohmann::json e;
    e["query"] = q.query;
    e["probs"] = q.probs;
    e["score_mean"] = q.score_mean;
    e["score_sd"] = q.score_sd;
    e["between_sd"] = q.between_sd;
    e["score_sd_pooled"] = q.score_sd_pooled;
    e["interval"] = {q.interval.lo, q.interval.hi};
    e["replication_scores"] = quantiles_json(q.replication_scores);
    e["cycle_scores"] = quantiles_json(q.cycle_scores);
    j["queries"].push_back(std::move(e));
  }
  return j;
}

}  // namespace cvbn
