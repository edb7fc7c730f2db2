#pragma once

// Event-driven simulation of fixed-time signals with two one-way approaches
// per intersection (eastbound = approach 0, southbound = approach 1). The
// isolated intersection is the 1x1 grid. Service times come from a state
// drawn once per cycle per intersection.
//
// Random streams (all from the run seed):
//   arrivals   derive_seed(seed, tag("isig-arrivals"), 2 * node + approach)
//   states     derive_seed(seed, tag("isig-state"), node), one uniform per cycle
//   routing    derive_seed(seed, tag("isig-route"), node), per departure
// Arrival streams use inverse-CDF exponentials, so runs at different volumes
// with the same seed see the same arrival pattern rescaled in time.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cvbn/csv.hpp"
#include "cvbn/cvss.hpp"
#include "cvbn/error.hpp"
#include "cvbn/rng.hpp"

namespace cvbn {

struct IntersectionConfig {
  double green = 45.0;  // per approach
  double cycle = 90.0;
  double base_service = 1.95;  // s per vehicle
  double volume = 500.0;       // vph per approach
  double overflow_limit = 130.0;  // reported only
};

struct NetworkConfig {
  std::size_t rows = 5;
  std::size_t cols = 5;
  double link_km = 0.61;
  double travel_mean = 46.0;  // s, exponential
  double straight = 0.5;
  double turn = 0.25;  // onto the crossing street; the rest leaves the network
  IntersectionConfig signal;
};

inline constexpr std::array<double, kImpactStates> kServiceMap = {1.95, 2.60, 3.90, 9.75, 19.5};

struct ServicePerturbation {
  std::array<double, kImpactStates> probs{1.0, 0.0, 0.0, 0.0, 0.0};
  std::array<double, kImpactStates> service = kServiceMap;
};

/// Probabilities must sum to 1 within 0.02 and are renormalized.
inline ServicePerturbation make_perturbation(std::span<const double> probs) {
  if (probs.size() != kImpactStates)
    throw Error(ErrorKind::InvalidConfig, "perturbation needs five state probabilities");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::InvalidConfig, "perturbation probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > kScoreInputTolerance)
    throw Error(ErrorKind::UnnormalizedInput, "perturbation probabilities sum to " + fmt_num(total));
  ServicePerturbation p;
  for (std::size_t k = 0; k < kImpactStates; ++k) p.probs[k] = probs[k] / total;
  return p;
}

inline ServicePerturbation make_perturbation(std::initializer_list<double> probs) {
  return make_perturbation(std::span<const double>(probs.begin(), probs.size()));
}

struct ApproachStats {
  std::size_t intersection = 0;
  std::size_t approach = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  double avg_queue = 0.0;  // time-average vehicles at the approach, including the one in service
  double max_queue = 0.0;
  double avg_delay = 0.0;  // time at the approach per arriving vehicle, censored at the horizon
  double avg_delay_served = 0.0;  // queue wait + service per departed vehicle
  double utilization = 0.0;  // arrivals / capacity over the horizon
  double capacity = 0.0;     // vehicles that fit in the green times of the horizon
  bool overflow = false;     // max queue above the approach storage
};

struct Measures {
  double avg_queue = 0.0;
  double max_queue = 0.0;
  double avg_delay = 0.0;
  double utilization = 0.0;
};

struct SimResult {
  std::vector<ApproachStats> approaches;
  std::vector<Measures> intersections;  // per intersection, over its approaches
  Measures aggregate;
  double duration = 0.0;
  std::uint64_t seed = 0;
  // flow accounting
  std::uint64_t entered = 0;
  std::uint64_t exited = 0;
  std::uint64_t queued_at_end = 0;
  std::uint64_t in_transit_at_end = 0;
  std::uint64_t trace_hash = 0;
};

enum class TraceKind { Arrive, Start, Depart, Blocked };

struct TraceEvent {
  double time;
  TraceKind kind;
  std::uint32_t node;
  std::uint32_t approach;
  std::uint64_t vehicle;
  double service = 0.0;    // Start, Blocked: discharge time of the current cycle
  double remaining = 0.0;  // Blocked: green time left
};

namespace detail {

class SignalGrid {
 public:
  SignalGrid(const NetworkConfig& cfg, const std::optional<ServicePerturbation>& pert, double duration,
             std::uint64_t seed, std::vector<TraceEvent>* trace)
      : cfg_(cfg), duration_(duration), seed_(seed), trace_(trace) {
    const IntersectionConfig& sig = cfg.signal;
    if (cfg.rows < 1 || cfg.cols < 1) throw Error(ErrorKind::InvalidConfig, "grid needs at least one node");
    if (std::abs(2.0 * sig.green - sig.cycle) > 1e-9)
      throw Error(ErrorKind::InvalidConfig, "two approaches need green * 2 == cycle");
    if (!(sig.base_service > 0.0)) throw Error(ErrorKind::InvalidConfig, "discharge time must be positive");
    if (!(sig.volume >= 0.0)) throw Error(ErrorKind::InvalidConfig, "volume must be non-negative");
    if (!(duration > 0.0)) throw Error(ErrorKind::InvalidConfig, "duration must be positive");
    if (!(cfg.travel_mean > 0.0)) throw Error(ErrorKind::InvalidConfig, "travel mean must be positive");
    if (cfg.straight < 0.0 || cfg.turn < 0.0 || cfg.straight + cfg.turn > 1.0 + 1e-12)
      throw Error(ErrorKind::InvalidConfig, "turning probabilities must lie in [0, 1] and sum to at most 1");
    if (pert)
      for (double s : pert->service)
        if (s < sig.base_service) throw Error(ErrorKind::InvalidConfig, "service map below base discharge");

    const std::size_t nodes = cfg.rows * cfg.cols;
    cycles_ = static_cast<std::size_t>(std::ceil(duration / sig.cycle));
    service_.assign(nodes, std::vector<double>(cycles_, sig.base_service));
    if (pert) {
      for (std::size_t n = 0; n < nodes; ++n) {
        Rng rng(derive_seed(seed, stream_tag("isig-state"), n));
        for (std::size_t k = 0; k < cycles_; ++k)
          service_[n][k] = pert->service[rng.categorical(pert->probs)];
      }
    }
    approaches_.resize(nodes * 2);
    for (std::size_t n = 0; n < nodes; ++n)
      for (std::size_t a = 0; a < 2; ++a) {
        Approach& ap = approaches_[n * 2 + a];
        ap.stats.intersection = n;
        ap.stats.approach = a;
        ap.arrivals = Rng(derive_seed(seed, stream_tag("isig-arrivals"), n * 2 + a));
        // boundary sources carry the full volume, interior ones top up what upstream delivers
        const bool boundary = a == 0 ? col(n) == 0 : row(n) == 0;
        ap.source_rate = sig.volume / 3600.0 * (boundary ? 1.0 : 1.0 - cfg.straight - cfg.turn);
        for (std::size_t k = 0; k < cycles_; ++k) {
          const double start = static_cast<double>(k) * sig.cycle;
          if (start >= duration) break;
          const double green = std::min(sig.green, duration - start - green_offset(a));
          if (green > 0.0) ap.stats.capacity += std::floor(green / service_[n][k] + 1e-9);
        }
      }
    routes_.reserve(nodes);
    for (std::size_t n = 0; n < nodes; ++n) routes_.emplace_back(derive_seed(seed, stream_tag("isig-route"), n));
  }

  SimResult run() {
    const std::size_t nodes = cfg_.rows * cfg_.cols;
    for (std::size_t i = 0; i < approaches_.size(); ++i) schedule_external(i, 0.0);
    for (std::size_t k = 0; k < cycles_; ++k)
      for (std::size_t a = 0; a < 2; ++a) {
        const double t = static_cast<double>(k) * cfg_.signal.cycle + green_offset(a);
        if (t >= duration_) continue;
        for (std::size_t n = 0; n < nodes; ++n) push(t, EventKind::GreenStart, n * 2 + a, 0);
      }

    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      if (e.time > duration_) break;
      Approach& ap = approaches_[e.approach];
      switch (e.kind) {
        case EventKind::External: {
          const std::uint64_t id = next_vehicle_++;
          ++entered_;
          arrive(e.approach, id, e.time);
          schedule_external(e.approach, e.time);
          break;
        }
        case EventKind::Link:
          --in_transit_;
          arrive(e.approach, e.vehicle, e.time);
          break;
        case EventKind::GreenStart:
          try_start(e.approach, e.time);
          break;
        case EventKind::ServiceEnd: {
          advance(ap, e.time);
          const Waiting v = ap.queue.front();
          ap.queue.pop_front();
          ap.busy = false;
          ++ap.stats.departures;
          ap.delay_sum += e.time - v.arrival;
          record(e.time, TraceKind::Depart, e.approach, v.id);
          route(e.approach, v.id, e.time);
          try_start(e.approach, e.time);
          break;
        }
      }
    }

    SimResult res;
    res.duration = duration_;
    res.seed = seed_;
    res.entered = entered_;
    res.exited = exited_;
    res.in_transit_at_end = in_transit_;
    res.intersections.assign(nodes, Measures{});
    double total_area = 0.0, total_arrivals = 0.0, total_capacity = 0.0;
    for (auto& ap : approaches_) {
      advance(ap, duration_);
      ApproachStats& s = ap.stats;
      s.avg_queue = ap.area / duration_;
      s.avg_delay = s.arrivals ? ap.area / static_cast<double>(s.arrivals) : 0.0;
      s.avg_delay_served = s.departures ? ap.delay_sum / static_cast<double>(s.departures) : 0.0;
      s.utilization = s.capacity > 0.0 ? static_cast<double>(s.arrivals) / s.capacity : 0.0;
      s.overflow = s.max_queue > cfg_.signal.overflow_limit;
      res.queued_at_end += ap.queue.size();
      res.approaches.push_back(s);
      total_area += ap.area;
      total_arrivals += static_cast<double>(s.arrivals);
      total_capacity += s.capacity;
    }
    for (std::size_t n = 0; n < nodes; ++n)
      res.intersections[n] = combine({&res.approaches[2 * n], &res.approaches[2 * n + 1]},
                                     approaches_[2 * n].area + approaches_[2 * n + 1].area);
    double q = 0.0, m = 0.0;
    for (const auto& s : res.approaches) {
      q += s.avg_queue;
      m += s.max_queue;
    }
    const double na = static_cast<double>(res.approaches.size());
    res.aggregate = {q / na, m / na,
                     total_arrivals > 0.0 ? total_area / total_arrivals : 0.0,
                     total_capacity > 0.0 ? total_arrivals / total_capacity : 0.0};
    res.trace_hash = hash_;
    return res;
  }

 private:
  enum class EventKind { External, Link, GreenStart, ServiceEnd };
  struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::size_t approach;
    std::uint64_t vehicle;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  struct Waiting {
    std::uint64_t id;
    double arrival;
  };
  struct Approach {
    ApproachStats stats;
    std::deque<Waiting> queue;  // front is in service when busy
    bool busy = false;
    double area = 0.0;
    double last = 0.0;
    double delay_sum = 0.0;
    double source_rate = 0.0;
    Rng arrivals{0};
  };

  std::size_t row(std::size_t node) const { return node / cfg_.cols; }
  std::size_t col(std::size_t node) const { return node % cfg_.cols; }
  double green_offset(std::size_t a) const { return a == 0 ? 0.0 : cfg_.signal.green; }

  static Measures combine(std::initializer_list<const ApproachStats*> aps, double area) {
    Measures m;
    double arr = 0.0, cap = 0.0;
    for (const ApproachStats* s : aps) {
      m.avg_queue += s->avg_queue;
      m.max_queue += s->max_queue;
      arr += static_cast<double>(s->arrivals);
      cap += s->capacity;
    }
    m.avg_queue /= static_cast<double>(aps.size());
    m.max_queue /= static_cast<double>(aps.size());
    m.avg_delay = arr > 0.0 ? area / arr : 0.0;
    m.utilization = cap > 0.0 ? arr / cap : 0.0;
    return m;
  }

  void push(double t, EventKind k, std::size_t approach, std::uint64_t vehicle) {
    events_.push(Event{t, seq_++, k, approach, vehicle});
  }

  void schedule_external(std::size_t i, double now) {
    Approach& ap = approaches_[i];
    if (ap.source_rate <= 0.0) return;
    const double t = now + ap.arrivals.exponential(1.0 / ap.source_rate);
    if (t < duration_) push(t, EventKind::External, i, 0);
  }

  void advance(Approach& ap, double t) {
    ap.area += static_cast<double>(ap.queue.size()) * (t - ap.last);
    ap.last = t;
  }

  void arrive(std::size_t i, std::uint64_t id, double t) {
    Approach& ap = approaches_[i];
    advance(ap, t);
    ap.queue.push_back({id, t});
    ++ap.stats.arrivals;
    ap.stats.max_queue = std::max(ap.stats.max_queue, static_cast<double>(ap.queue.size()));
    record(t, TraceKind::Arrive, i, id);
    try_start(i, t);
  }

  void try_start(std::size_t i, double t) {
    Approach& ap = approaches_[i];
    if (ap.busy || ap.queue.empty()) return;
    const std::size_t a = i % 2;
    const double cyc = cfg_.signal.cycle;
    const auto k = static_cast<std::size_t>(std::floor(t / cyc));
    const double start = static_cast<double>(k) * cyc + green_offset(a);
    const double end = std::min(start + cfg_.signal.green, duration_);
    if (t < start || t >= end || k >= cycles_) return;
    const double s = service_[i / 2][k];
    if (t + s > end + 1e-9) {
      record(t, TraceKind::Blocked, i, ap.queue.front().id, s, end - t);
      return;
    }
    ap.busy = true;
    record(t, TraceKind::Start, i, ap.queue.front().id, s);
    push(t + s, EventKind::ServiceEnd, i, 0);
  }

  void route(std::size_t i, std::uint64_t id, double t) {
    const std::size_t n = i / 2, a = i % 2;
    Rng& rng = routes_[n];
    const double u = rng.uniform();
    std::optional<std::pair<std::size_t, std::size_t>> next;  // (node, approach)
    const std::size_t r = row(n), c = col(n);
    // eastbound continues to the next column, southbound to the next row;
    // turning swaps street direction
    const bool go_east = (a == 0 && u < cfg_.straight) || (a == 1 && u >= cfg_.straight && u < cfg_.straight + cfg_.turn);
    const bool go_south = (a == 1 && u < cfg_.straight) || (a == 0 && u >= cfg_.straight && u < cfg_.straight + cfg_.turn);
    if (go_east && c + 1 < cfg_.cols) next = {{n + 1, 0}};
    if (go_south && r + 1 < cfg_.rows) next = {{n + cfg_.cols, 1}};
    if (!next) {
      ++exited_;
      return;
    }
    ++in_transit_;
    push(t + rng.exponential(cfg_.travel_mean), EventKind::Link, next->first * 2 + next->second, id);
  }

  void record(double t, TraceKind k, std::size_t i, std::uint64_t id, double s = 0.0, double rem = 0.0) {
    std::uint64_t h = hash_ ^ std::bit_cast<std::uint64_t>(t);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(k) << 56) ^ (i << 40) ^ id);
    hash_ = h;
    if (trace_)
      trace_->push_back({t, k, static_cast<std::uint32_t>(i / 2), static_cast<std::uint32_t>(i % 2), id, s, rem});
  }

  NetworkConfig cfg_;
  double duration_;
  std::uint64_t seed_;
  std::vector<TraceEvent>* trace_;
  std::size_t cycles_ = 0;
  std::vector<std::vector<double>> service_;  // [node][cycle]
  std::vector<Approach> approaches_;
  std::vector<Rng> routes_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_vehicle_ = 0;
  std::uint64_t entered_ = 0;
  std::uint64_t exited_ = 0;
  std::uint64_t in_transit_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace detail

inline SimResult run_network(const NetworkConfig& cfg, const std::optional<ServicePerturbation>& pert,
                             double duration, std::uint64_t seed,
                             std::vector<TraceEvent>* trace = nullptr) {
  return detail::SignalGrid(cfg, pert, duration, seed, trace).run();
}

inline SimResult run_isolated(const IntersectionConfig& cfg, const std::optional<ServicePerturbation>& pert,
                              double duration, std::uint64_t seed,
                              std::vector<TraceEvent>* trace = nullptr) {
  NetworkConfig one;
  one.rows = one.cols = 1;
  one.signal = cfg;
  return run_network(one, pert, duration, seed, trace);
}

/// Vehicles served per cycle at a fixed discharge time.
inline std::size_t cycle_capacity(const IntersectionConfig& cfg, double service) {
  return static_cast<std::size_t>(std::floor(cfg.green / service + 1e-9));
}

// ---------------------------------------------------------------------------
// Trace checks

/// Violations of FIFO order and work conservation; empty when the trace is
/// clean. Work conservation: whenever an approach is green, idle and has a
/// queue, its head either starts at once or is recorded as blocked because its
/// discharge time exceeds the green left; it is then owed a start at the next
/// green.
inline std::vector<std::string> check_trace(const std::vector<TraceEvent>& trace,
                                            const IntersectionConfig& sig, double duration) {
  constexpr double eps = 1e-9;
  std::vector<std::string> bad;
  auto first_green = [&](double t, std::uint32_t a) {
    const double off = a == 0 ? 0.0 : sig.green;
    const double k = std::floor((t - off) / sig.cycle);
    const double g0 = k * sig.cycle + off;
    return t < g0 + sig.green - eps ? std::max(t, g0) : g0 + sig.cycle;
  };
  struct Lane {
    std::deque<std::uint64_t> order;
    bool busy = false;
    std::optional<double> due;  // time by which a start or block must be seen
  };
  std::map<std::pair<std::uint32_t, std::uint32_t>, Lane> lanes;
  for (const auto& e : trace) {
    Lane& l = lanes[{e.node, e.approach}];
    const std::string where = "node " + std::to_string(e.node) + " approach " + std::to_string(e.approach) +
                              " t=" + fmt_num(e.time);
    if (l.due && e.time > *l.due + eps && *l.due < duration - eps)
      bad.push_back("idle during green with a queue before " + where);
    switch (e.kind) {
      case TraceKind::Arrive:
        l.order.push_back(e.vehicle);
        if (!l.busy && !l.due) l.due = first_green(e.time, e.approach);
        break;
      case TraceKind::Start:
        if (l.busy) bad.push_back("two vehicles in service at " + where);
        if (l.order.empty() || l.order.front() != e.vehicle) bad.push_back("FIFO violated at " + where);
        l.busy = true;
        l.due.reset();
        break;
      case TraceKind::Depart:
        if (l.order.empty() || l.order.front() != e.vehicle) bad.push_back("FIFO violated at " + where);
        if (!l.order.empty()) l.order.pop_front();
        l.busy = false;
        l.due.reset();
        if (!l.order.empty()) l.due = first_green(e.time, e.approach);
        break;
      case TraceKind::Blocked:
        if (l.busy) bad.push_back("blocked while busy at " + where);
        if (!(e.service > e.remaining)) bad.push_back("blocked although the head fits at " + where);
        l.due = first_green(e.time + e.remaining + eps, e.approach);
        break;
    }
  }
  for (const auto& [key, l] : lanes)
    if (l.due && *l.due < duration - eps)
      bad.push_back("queue left idle at node " + std::to_string(key.first) + " approach " +
                    std::to_string(key.second));
  return bad;
}

// ---------------------------------------------------------------------------
// Volume scans

struct SimScenario {
  std::string name;
  std::optional<ServicePerturbation> perturbation;
  // optional: seed k uses per_seed[k % size] instead (one vector per MC replication)
  std::vector<ServicePerturbation> per_seed;
};

inline std::vector<SimScenario> default_scenarios() {
  return {{"baseline", std::nullopt, {}},
          {"with-sensor", make_perturbation({0.93, 0.0685, 0.00051, 0.0005, 0.00049}), {}},
          {"without-sensor", make_perturbation({0.727, 0.261, 0.00035, 0.00046, 0.00034}), {}}};
}

struct ScanConfig {
  bool network = false;
  NetworkConfig grid;  // signal settings in grid.signal; ignored grid shape when isolated
  std::vector<double> volumes;
  std::vector<SimScenario> scenarios = default_scenarios();
  std::vector<std::uint64_t> seeds;
  double duration = 3600.0;
  std::size_t workers = 1;
};

inline std::vector<double> volume_range(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::InvalidConfig, "bad volume range");
  std::vector<double> v;
  for (int i = 0;; ++i) {
    const double x = lo + step * i;
    if (x > hi + 1e-9) break;
    v.push_back(x);
  }
  return v;
}

struct ScanRow {
  std::string scenario;
  double volume = 0.0;
  std::optional<std::size_t> intersection;  // empty for the aggregate
  std::optional<std::size_t> approach;      // empty for intersection or aggregate rows
  Measures m;                                // averaged over seeds
};

struct ScanDelta {
  std::string scenario;
  // mean over volumes of (scenario - baseline), and that difference relative
  // to the baseline mean
  Measures abs;
  Measures pct;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::vector<ScanDelta> deltas;
  std::vector<Measures> aggregate;  // [scenario][volume] flattened, seed-averaged
  bool conserved = true;
};

inline ScanResult saturation_scan(const ScanConfig& cfg) {
  if (cfg.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "scan needs at least one seed");
  const std::size_t ns = cfg.scenarios.size(), nv = cfg.volumes.size(), nseed = cfg.seeds.size();
  std::vector<SimResult> runs(ns * nv * nseed);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < runs.size();) {
      const std::size_t s = j / (nv * nseed), v = (j / nseed) % nv, k = j % nseed;
      NetworkConfig g = cfg.grid;
      g.signal.volume = cfg.volumes[v];
      if (!cfg.network) g.rows = g.cols = 1;
      const SimScenario& sc = cfg.scenarios[s];
      const std::optional<ServicePerturbation> pert =
          sc.per_seed.empty() ? sc.perturbation : std::optional(sc.per_seed[k % sc.per_seed.size()]);
      runs[j] = run_network(g, pert, cfg.duration, cfg.seeds[k]);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, runs.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ScanResult out;
  auto add = [](Measures& a, const Measures& b, double w) {
    a.avg_queue += w * b.avg_queue;
    a.max_queue += w * b.max_queue;
    a.avg_delay += w * b.avg_delay;
    a.utilization += w * b.utilization;
  };
  const double w = 1.0 / static_cast<double>(nseed);
  out.aggregate.assign(ns * nv, Measures{});
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t v = 0; v < nv; ++v) {
      const SimResult& first = runs[(s * nv + v) * nseed];
      Measures agg;
      std::vector<Measures> inter(first.intersections.size());
      std::vector<Measures> appr(first.approaches.size());
      for (std::size_t k = 0; k < nseed; ++k) {
        const SimResult& r = runs[(s * nv + v) * nseed + k];
        if (r.entered != r.exited + r.queued_at_end + r.in_transit_at_end) out.conserved = false;
        add(agg, r.aggregate, w);
        for (std::size_t i = 0; i < inter.size(); ++i) add(inter[i], r.intersections[i], w);
        for (std::size_t i = 0; i < appr.size(); ++i) {
          const ApproachStats& a = r.approaches[i];
          add(appr[i], Measures{a.avg_queue, a.max_queue, a.avg_delay, a.utilization}, w);
        }
      }
      out.aggregate[s * nv + v] = agg;
      const std::string& name = cfg.scenarios[s].name;
      out.rows.push_back({name, cfg.volumes[v], std::nullopt, std::nullopt, agg});
      for (std::size_t i = 0; i < inter.size(); ++i) out.rows.push_back({name, cfg.volumes[v], i, std::nullopt, inter[i]});
      for (std::size_t i = 0; i < appr.size(); ++i)
        out.rows.push_back({name, cfg.volumes[v], i / 2, i % 2, appr[i]});
    }

  std::optional<std::size_t> base;
  for (std::size_t s = 0; s < ns; ++s)
    if (!cfg.scenarios[s].perturbation && cfg.scenarios[s].per_seed.empty()) base = s;
  if (base) {
    Measures b;
    for (std::size_t v = 0; v < nv; ++v) add(b, out.aggregate[*base * nv + v], 1.0 / static_cast<double>(nv));
    for (std::size_t s = 0; s < ns; ++s) {
      if (s == *base) continue;
      Measures m;
      for (std::size_t v = 0; v < nv; ++v) add(m, out.aggregate[s * nv + v], 1.0 / static_cast<double>(nv));
      ScanDelta d;
      d.scenario = cfg.scenarios[s].name;
      d.abs = {m.avg_queue - b.avg_queue, m.max_queue - b.max_queue, m.avg_delay - b.avg_delay,
               m.utilization - b.utilization};
      auto pct = [](double x, double ref) { return ref > 0.0 ? 100.0 * x / ref : 0.0; };
      d.pct = {pct(d.abs.avg_queue, b.avg_queue), pct(d.abs.max_queue, b.max_queue),
               pct(d.abs.avg_delay, b.avg_delay), pct(d.abs.utilization, b.utilization)};
      out.deltas.push_back(d);
    }
  }
  return out;
}

inline void write_sim_csv(std::ostream& os, const std::vector<ScanRow>& rows) {
  write_csv_header(os, {"scenario", "volume", "intersection", "approach", "avg_queue", "max_queue",
                        "avg_delay", "utilization"});
  for (const auto& r : rows) {
    CsvRow row;
    row << r.scenario << r.volume << (r.intersection ? std::to_string(*r.intersection) : "all")
        << (r.approach ? std::to_string(*r.approach) : "all") << r.m.avg_queue << r.m.max_queue
        << r.m.avg_delay << r.m.utilization;
    os << row.str() << '\n';
  }
}

inline void write_sim_deltas_csv(std::ostream& os, const std::vector<ScanDelta>& deltas) {
  write_csv_header(os, {"scenario", "delay_abs", "queue_abs", "max_queue_abs", "delay_pct", "queue_pct",
                        "max_queue_pct"});
  for (const auto& d : deltas)
    os << (CsvRow() << d.scenario << d.abs.avg_delay << d.abs.avg_queue << d.abs.max_queue << d.pct.avg_delay
                    << d.pct.avg_queue << d.pct.max_queue)
              .str()
       << '\n';
}

}  // namespace cvbn
