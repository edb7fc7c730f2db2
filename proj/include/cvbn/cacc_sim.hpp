#pragma once

// Fixed-step platoon simulation on a two-lane corridor without lane changes.
// Platoons alternate lanes (platoon p drives in lane p % lanes). Each leader
// holds the desired speed; followers run a constant-time-gap law on the gap
// to their predecessor and the speed broadcast by their leader. Attacks touch
// the broadcast only.
//
// Units inside the simulation are m, s, m/s. Perturbation distributions are
// given in km/h, as is the desired speed in the config.
//
// Random streams (from the run seed):
//   gaps     derive_seed(seed, tag("cacc-gaps"), serial)     per spawned platoon
//   attacks  derive_seed(seed, tag("cacc-attack"), serial)   per spawned platoon
// Every broadcast tick (or episode start) consumes three uniforms: one for the
// state and two for a standard normal z, and the perturbation is mean + sd * z.
// Profiles with the same state probabilities therefore attack the same
// messages with rescaled perturbations.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cvbn/csv.hpp"
#include "cvbn/cvss.hpp"
#include "cvbn/error.hpp"
#include "cvbn/rng.hpp"

namespace cvbn {

struct PlatoonConfig {
  std::size_t platoons = 4;
  std::size_t vehicles = 10;  // per platoon, leader included
  std::size_t lanes = 2;
  double corridor_m = 1850.0;
  double gap_mean = 10.0;  // m, initial intra-platoon gaps ~ N(mean, sd)
  double gap_sd = 1.0;
  std::vector<double> initial_gaps;  // if set, used for every platoon instead of the draw
  double inter_gap = 50.0;  // m, leader to the previous platoon's tail
  double vehicle_length = 4.5;
  double desired_kmh = 85.0;
  double dt = 0.1;
  double broadcast_interval = 0.1;
  double horizon = 3600.0;
  bool recirculate = true;
  // 0: a state is drawn for every message. Otherwise a state and a
  // perturbation are held for an exponential episode with this mean (s).
  double episode_mean = 0.0;
  double stop_kmh = 5.0;
  double sample_interval = 1.0;  // headway/speed samples
  bool keep_samples = false;

  double desired_speed() const { return desired_kmh / 3.6; }
  double free_flow_time() const { return corridor_m / desired_speed(); }
};

struct FollowerGains {
  double k_a = 0.4;   // 1/s, on broadcast - own speed
  double k_b = 0.25;  // 1/s^2, on gap - (s0 + own * t_gap)
  double s0 = 2.0;
  double t_gap = 0.5;
  double a_min = -6.0;
  double a_max = 3.0;
  double ttc = 1.5;  // s, below this brake at a_min
};

/// Acceleration (m/s^2) of a follower. Speeds in m/s, gap in m (bumper to bumper).
inline double follower_control(double own, double gap, double predecessor, double broadcast,
                               const FollowerGains& g = {}) {
  if (!(gap > 0.0)) throw Error(ErrorKind::NonPositiveGap, "gap " + fmt_num(gap) + " m");
  const double closing = own - predecessor;
  if (closing > 0.0 && gap / closing < g.ttc) return g.a_min;
  const double a = g.k_a * (broadcast - own) + g.k_b * (gap - (g.s0 + own * g.t_gap));
  return std::clamp(a, g.a_min, g.a_max);
}

struct NormalSpec {
  double mean = 0.0;  // km/h
  double sd = 0.0;
};

/// Parses "N(mean,sd)"; spaces are ignored.
inline NormalSpec parse_normal(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  const auto fail = [&] { return Error(ErrorKind::ParseError, "expected N(mean,sd), got '" + text + "'"); };
  if (s.size() < 6 || (s[0] != 'N' && s[0] != 'n') || s[1] != '(' || s.back() != ')') throw fail();
  const std::string body = s.substr(2, s.size() - 3);
  const auto comma = body.find(',');
  if (comma == std::string::npos) throw fail();
  NormalSpec n;
  try {
    std::size_t used = 0;
    n.mean = std::stod(body.substr(0, comma), &used);
    if (used != comma) throw fail();
    const std::string rest = body.substr(comma + 1);
    n.sd = std::stod(rest, &used);
    if (used != rest.size()) throw fail();
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (!std::isfinite(n.mean) || !std::isfinite(n.sd) || n.sd < 0.0) throw fail();
  return n;
}

inline std::string to_string(const NormalSpec& n) { return "N(" + fmt_num(n.mean) + "," + fmt_num(n.sd) + ")"; }

struct AttackProfile {
  std::array<double, kImpactStates> probs{0.9460, 0.0538, 2.15e-5, 3.0e-6, 3.0e-6};
  std::array<NormalSpec, kImpactStates> perturbation{
      NormalSpec{0.0, 0.0}, NormalSpec{5.0, 5.0}, NormalSpec{80.0, 120.0}, NormalSpec{160.0, 240.0},
      NormalSpec{320.0, 480.0}};

  AttackProfile with_low(const NormalSpec& low) const {
    AttackProfile p = *this;
    p.perturbation[1] = low;
    return p;
  }
};

/// Checks and renormalizes (tolerance as for scores).
inline AttackProfile normalized(AttackProfile p) {
  double total = 0.0;
  for (double x : p.probs) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::InvalidConfig, "attack probabilities must be non-negative");
    total += x;
  }
  if (std::abs(total - 1.0) > kScoreInputTolerance)
    throw Error(ErrorKind::UnnormalizedInput, "attack probabilities sum to " + fmt_num(total));
  for (double& x : p.probs) x /= total;
  for (const auto& n : p.perturbation)
    if (!std::isfinite(n.mean) || !std::isfinite(n.sd) || n.sd < 0.0)
      throw Error(ErrorKind::InvalidConfig, "attack perturbation parameters must be finite");
  return p;
}

struct VehicleState {
  double position = 0.0;  // front bumper, m from the corridor entrance
  double speed = 0.0;     // m/s
  double accel = 0.0;
  std::size_t lane = 0;
  std::size_t platoon = 0;  // spawn serial
  std::size_t index = 0;    // 0 = leader
  std::size_t stops = 0;
  std::uint64_t id = 0;
  double entered = std::numeric_limits<double>::quiet_NaN();
  bool done = false;  // has left the corridor; keeps driving until its platoon retires
  bool below_stop = false;
};

struct CaccResult {
  double avg_delay = 0.0;  // s per completed traversal
  double avg_speed = 0.0;  // km/h, mean over traversals of corridor / travel time
  std::size_t stops = 0;
  double total_delay = 0.0;
  std::optional<double> pct_diff;  // total delay vs the seed-matched baseline
  std::size_t traversals = 0;
  double headway_mean = 0.0;  // s, followers inside the corridor
  double headway_var = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  double min_speed = std::numeric_limits<double>::infinity();
  double min_accel = 0.0;
  double max_accel = 0.0;
  std::size_t attacked_messages = 0;
  std::uint64_t seed = 0;
  std::vector<double> delays;    // per traversal, if keep_samples
  std::vector<double> headways;  // per sample, if keep_samples
  std::vector<double> speeds;    // km/h per sample, if keep_samples
};

struct TrajectoryPoint {
  double t;
  std::uint64_t vehicle;
  double position;
  double speed;      // km/h
  double broadcast;  // km/h, as received by this vehicle's platoon
};

using TrajectorySink = std::vector<TrajectoryPoint>;

namespace detail {

inline void validate(const PlatoonConfig& c) {
  auto bad = [](const std::string& m) { return Error(ErrorKind::InvalidConfig, m); };
  if (c.platoons == 0 || c.vehicles == 0 || c.lanes == 0) throw bad("platoon counts must be positive");
  if (!(c.corridor_m > 0.0) || !(c.desired_kmh > 0.0) || !(c.dt > 0.0) || !(c.horizon >= 0.0))
    throw bad("corridor, speed, step and horizon must be positive");
  if (!(c.vehicle_length >= 0.0) || !(c.inter_gap > 0.0) || !(c.gap_sd >= 0.0) || !(c.gap_mean > 0.0))
    throw bad("gaps must be positive");
  const double ratio = c.broadcast_interval / c.dt;
  if (!(ratio >= 1.0) || std::abs(ratio - std::round(ratio)) > 1e-9)
    throw bad("broadcast interval must be a whole number of steps");
  if (!c.initial_gaps.empty()) {
    if (c.initial_gaps.size() + 1 != c.vehicles) throw bad("initial_gaps needs one gap per follower");
    for (double g : c.initial_gaps)
      if (!(g > 0.0)) throw bad("initial gaps must be positive");
  }
  if (!(c.episode_mean >= 0.0) || !(c.sample_interval > 0.0)) throw bad("bad episode or sample interval");
}

struct Platoon {
  std::size_t serial = 0;
  std::size_t lane = 0;
  std::vector<VehicleState> v;  // v[0] is the leader
  Rng attack{0};
  double broadcast = 0.0;     // m/s currently received by followers
  double perturbation = 0.0;  // km/h currently applied
  double episode_end = -1.0;

  bool done() const { return v.back().done; }
};

class Corridor {
 public:
  Corridor(const PlatoonConfig& cfg, const std::optional<AttackProfile>& profile, std::uint64_t seed,
           TrajectorySink* trajectory)
      : cfg_(cfg), profile_(profile), seed_(seed), trajectory_(trajectory) {
    validate(cfg_);
    if (profile_) profile_ = normalized(*profile_);
    v_des_ = cfg_.desired_speed();
    for (std::size_t p = 0; p < cfg_.platoons; ++p) spawn(p % cfg_.lanes, 0.0);
  }

  CaccResult run() {
    CaccResult res;
    res.seed = seed_;
    const auto steps = static_cast<std::size_t>(std::llround(cfg_.horizon / cfg_.dt));
    const auto tick = static_cast<std::size_t>(std::llround(cfg_.broadcast_interval / cfg_.dt));
    const auto sample_every =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg_.sample_interval / cfg_.dt)));
    double hw_n = 0.0, hw_mean = 0.0, hw_m2 = 0.0, speed_sum = 0.0;
    std::vector<std::vector<double>> accel(platoons_.size());

    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * cfg_.dt;
      const double t1 = static_cast<double>(k + 1) * cfg_.dt;
      if (k % tick == 0)
        for (auto& p : platoons_) broadcast(p, t, res);

      // accelerations from the state at t, applied together
      accel.resize(platoons_.size());
      for (std::size_t q = 0; q < platoons_.size(); ++q) {
        const Platoon& p = platoons_[q];
        accel[q].assign(p.v.size(), 0.0);
        for (std::size_t j = 0; j < p.v.size(); ++j) {
          const VehicleState& v = p.v[j];
          if (j == 0) {
            double a = std::clamp(gains_.k_a * (v_des_ - v.speed), gains_.a_min, gains_.a_max);
            if (const VehicleState* ahead = lane_ahead(q))
              a = std::min(a, follower_control(v.speed, gap(v, *ahead), ahead->speed, v_des_, gains_));
            accel[q][j] = a;
          } else {
            accel[q][j] = follower_control(v.speed, gap(v, p.v[j - 1]), p.v[j - 1].speed, p.broadcast, gains_);
          }
        }
      }

      for (std::size_t q = 0; q < platoons_.size(); ++q)
        for (std::size_t j = 0; j < platoons_[q].v.size(); ++j) {
          VehicleState& v = platoons_[q].v[j];
          const double a = accel[q][j];
          const double x0 = v.position;
          double v1 = v.speed + a * cfg_.dt;
          if (v1 < 0.0) {
            v.position += v.speed * v.speed / (-2.0 * a);  // halts within the step
            v1 = 0.0;
          } else {
            v.position += 0.5 * (v.speed + v1) * cfg_.dt;
          }
          v.accel = (v1 - v.speed) / cfg_.dt;
          v.speed = v1;
          res.min_accel = std::min(res.min_accel, v.accel);
          res.max_accel = std::max(res.max_accel, v.accel);
          res.min_speed = std::min(res.min_speed, v.speed);
          // stops count over the whole trip, including the approach to the entrance
          const bool below = v.speed * 3.6 < cfg_.stop_kmh;
          if (!v.done && below && !v.below_stop) ++v.stops, ++res.stops;
          v.below_stop = below;
          if (std::isnan(v.entered) && x0 < 0.0 && v.position >= 0.0) v.entered = crossing(t, x0, v.position, 0.0);
          if (!v.done && v.position > cfg_.corridor_m) {
            if (!std::isnan(v.entered)) {
              const double tt = crossing(t, x0, v.position, cfg_.corridor_m) - v.entered;
              const double d = std::max(0.0, tt - cfg_.free_flow_time());
              res.total_delay += d;
              speed_sum += cfg_.corridor_m / tt * 3.6;
              ++res.traversals;
              if (cfg_.keep_samples) res.delays.push_back(d);
            }
            v.done = true;
          }
        }

      for (std::size_t q = 0; q < platoons_.size(); ++q) {
        const Platoon& p = platoons_[q];
        for (std::size_t j = 0; j < p.v.size(); ++j) {
          const VehicleState& v = p.v[j];
          const VehicleState* ahead = j > 0 ? &p.v[j - 1] : lane_ahead(q);
          if (!ahead) continue;
          const double g = gap(v, *ahead);
          if (!(g > 0.0))
            throw Error(ErrorKind::CollisionDetected,
                        "vehicle " + std::to_string(v.id) + " (platoon " + std::to_string(v.platoon) + ", index " +
                            std::to_string(v.index) + ") at t=" + fmt_num(t1) + " s, x=" + fmt_num(v.position) +
                            " m, gap " + fmt_num(g) + " m");
          res.min_gap = std::min(res.min_gap, g);
        }
      }

      if ((k + 1) % sample_every == 0)
        for (const Platoon& p : platoons_)
          for (std::size_t j = 0; j < p.v.size(); ++j) {
            const VehicleState& v = p.v[j];
            if (v.position < 0.0 || v.position > cfg_.corridor_m) continue;
            if (cfg_.keep_samples) res.speeds.push_back(v.speed * 3.6);
            if (j == 0 || v.speed < 0.1) continue;
            const double h = gap(v, p.v[j - 1]) / v.speed;
            hw_n += 1.0;
            const double d = h - hw_mean;
            hw_mean += d / hw_n;
            hw_m2 += d * (h - hw_mean);
            if (cfg_.keep_samples) res.headways.push_back(h);
          }

      if (trajectory_)
        for (const Platoon& p : platoons_)
          for (const VehicleState& v : p.v)
            trajectory_->push_back({t1, v.id, v.position, v.speed * 3.6, p.broadcast * 3.6});

      retire(t1);
    }

    res.avg_delay = res.traversals ? res.total_delay / static_cast<double>(res.traversals) : 0.0;
    res.avg_speed = res.traversals ? speed_sum / static_cast<double>(res.traversals) : 0.0;
    res.headway_mean = hw_mean;
    res.headway_var = hw_n > 1.0 ? hw_m2 / (hw_n - 1.0) : 0.0;
    if (!std::isfinite(res.min_gap)) res.min_gap = 0.0;
    if (!std::isfinite(res.min_speed)) res.min_speed = 0.0;
    return res;
  }

 private:
  void spawn(std::size_t lane, double now) {
    Platoon p;
    p.serial = serial_++;
    p.lane = lane;
    p.attack = Rng(derive_seed(seed_, stream_tag("cacc-attack"), p.serial));
    p.broadcast = v_des_;
    Rng gaps(derive_seed(seed_, stream_tag("cacc-gaps"), p.serial));

    double x = 0.0;
    for (const Platoon& q : platoons_)
      if (q.lane == lane) x = std::min(x, q.v.back().position - cfg_.vehicle_length - cfg_.inter_gap);
    for (std::size_t j = 0; j < cfg_.vehicles; ++j) {
      if (j > 0) {
        double g = cfg_.initial_gaps.empty() ? gaps.normal(cfg_.gap_mean, cfg_.gap_sd) : cfg_.initial_gaps[j - 1];
        while (!(g > 0.0)) g = gaps.normal(cfg_.gap_mean, cfg_.gap_sd);
        x -= cfg_.vehicle_length + g;
      }
      VehicleState v;
      v.position = x;
      v.speed = v_des_;
      v.lane = lane;
      v.platoon = p.serial;
      v.index = j;
      v.id = next_id_++;
      if (x >= 0.0) v.entered = now;  // placed on the entrance line
      p.v.push_back(v);
    }
    platoons_.push_back(std::move(p));
  }

  // Last vehicle of the nearest platoon ahead in the same lane.
  const VehicleState* lane_ahead(std::size_t q) const {
    const VehicleState& leader = platoons_[q].v[0];
    const VehicleState* best = nullptr;
    for (std::size_t r = 0; r < platoons_.size(); ++r) {
      if (r == q || platoons_[r].lane != leader.lane) continue;
      for (auto it = platoons_[r].v.rbegin(); it != platoons_[r].v.rend(); ++it) {
        if (it->position > leader.position) {
          if (!best || it->position < best->position) best = &*it;
          break;
        }
      }
    }
    return best;
  }

  double gap(const VehicleState& v, const VehicleState& ahead) const {
    return ahead.position - cfg_.vehicle_length - v.position;
  }

  double crossing(double t, double x0, double x1, double line) const {
    return x1 > x0 ? t + cfg_.dt * (line - x0) / (x1 - x0) : t + cfg_.dt;
  }

  void broadcast(Platoon& p, double t, CaccResult& res) {
    const double leader = p.v[0].speed;
    if (!profile_) {
      p.broadcast = leader;
      return;
    }
    const bool episodes = cfg_.episode_mean > 0.0;
    if (!episodes || t >= p.episode_end) {
      const double u = p.attack.uniform();
      const double z = p.attack.normal(0.0, 1.0);
      std::size_t state = kImpactStates - 1;
      double acc = 0.0;
      for (std::size_t s = 0; s < kImpactStates; ++s) {
        acc += profile_->probs[s];
        if (u < acc) {
          state = s;
          break;
        }
      }
      const NormalSpec& n = profile_->perturbation[state];
      p.perturbation = state == 0 ? 0.0 : n.mean + n.sd * z;
      if (state != 0) ++res.attacked_messages;
      if (episodes) p.episode_end = t + p.attack.exponential(cfg_.episode_mean);
    }
    p.broadcast = std::max(0.0, leader + p.perturbation / 3.6);
  }

  void retire(double now) {
    const std::size_t n = platoons_.size();
    std::vector<std::size_t> lanes;
    for (std::size_t q = 0; q < n; ++q)
      if (platoons_[q].done()) lanes.push_back(platoons_[q].lane);
    if (lanes.empty()) return;
    std::erase_if(platoons_, [](const Platoon& p) { return p.done(); });
    if (cfg_.recirculate)
      for (std::size_t lane : lanes) spawn(lane, now);
  }

  PlatoonConfig cfg_;
  std::optional<AttackProfile> profile_;
  std::uint64_t seed_;
  TrajectorySink* trajectory_;
  FollowerGains gains_;
  double v_des_ = 0.0;
  std::size_t serial_ = 0;
  std::uint64_t next_id_ = 0;
  std::vector<Platoon> platoons_;
};

}  // namespace detail

inline CaccResult run_scenario(const PlatoonConfig& cfg, const std::optional<AttackProfile>& profile,
                               std::uint64_t seed, TrajectorySink* trajectory = nullptr) {
  return detail::Corridor(cfg, profile, seed, trajectory).run();
}

/// Peak gain of the gap-error transfer between neighbours,
/// k_b / (s^2 + (k_a + k_b t_gap) s + k_b), over all frequencies. Values above
/// 1 mean some disturbance frequencies grow along the platoon.
inline double string_gain(const FollowerGains& g = {}) {
  const double c = g.k_a + g.k_b * g.t_gap;
  const double w2 = g.k_b - 0.5 * c * c;
  if (w2 <= 0.0) return 1.0;
  return g.k_b / std::sqrt((g.k_b - w2) * (g.k_b - w2) + c * c * w2);
}

// Sweeps

struct SweepVariant {
  std::string name;
  std::optional<AttackProfile> profile;  // empty = no attack
};

/// Baseline plus the default profile with each low-state override.
inline std::vector<SweepVariant> table_variants(const std::vector<NormalSpec>& lows,
                                                const AttackProfile& base = {}) {
  std::vector<SweepVariant> v{{"no-attack", std::nullopt}};
  for (const auto& n : lows) v.push_back({to_string(n), base.with_low(n)});
  return v;
}

inline std::vector<NormalSpec> default_lows() {
  return {{5.0, 5.0}, {5.0, 20.0}, {10.0, 10.0}, {40.0, 60.0}};
}

struct SweepRun {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  CaccResult result;
};

struct SweepRow {
  std::string variant;
  std::size_t runs = 0;  // successful
  double avg_delay = 0.0;
  double avg_speed = 0.0;
  double stops = 0.0;  // mean per run
  double total_delay = 0.0;
  std::optional<double> pct_diff;  // ratio of mean total delays over seeds both succeeded on
  double headway_var = 0.0;
};

struct SweepResult {
  std::vector<SweepRun> runs;  // [variant][seed] flattened
  std::vector<SweepRow> rows;
};

inline SweepResult attack_sweep(const PlatoonConfig& cfg, const std::vector<SweepVariant>& variants,
                                const std::vector<std::uint64_t>& seeds, std::size_t workers = 1) {
  if (seeds.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one seed");
  detail::validate(cfg);
  for (const auto& v : variants)
    if (v.profile) (void)normalized(*v.profile);
  const std::size_t nv = variants.size(), ns = seeds.size();
  SweepResult out;
  out.runs.resize(nv * ns);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < out.runs.size();) {
      SweepRun& r = out.runs[j];
      r.variant = variants[j / ns].name;
      r.seed = seeds[j % ns];
      try {
        r.result = run_scenario(cfg, variants[j / ns].profile, r.seed);
      } catch (const Error& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };
  const std::size_t w = std::max<std::size_t>(1, std::min(workers, out.runs.size()));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::optional<std::size_t> base;
  for (std::size_t v = 0; v < nv; ++v)
    if (!variants[v].profile) base = v;
  for (std::size_t v = 0; v < nv; ++v) {
    SweepRow row;
    row.variant = variants[v].name;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      SweepRun& r = out.runs[v * ns + k];
      if (!r.ok) continue;
      ++row.runs;
      row.avg_delay += r.result.avg_delay;
      row.avg_speed += r.result.avg_speed;
      row.stops += static_cast<double>(r.result.stops);
      row.total_delay += r.result.total_delay;
      row.headway_var += r.result.headway_var;
      if (base) {
        const SweepRun& b = out.runs[*base * ns + k];
        if (!b.ok) continue;
        num += r.result.total_delay;
        den += b.result.total_delay;
        if (b.result.total_delay > 0.0)
          r.result.pct_diff = 100.0 * (r.result.total_delay - b.result.total_delay) / b.result.total_delay;
      }
    }
    if (row.runs) {
      const double n = static_cast<double>(row.runs);
      row.avg_delay /= n;
      row.avg_speed /= n;
      row.stops /= n;
      row.total_delay /= n;
      row.headway_var /= n;
    }
    if (base && den > 0.0) row.pct_diff = 100.0 * (num - den) / den;
    out.rows.push_back(row);
  }
  return out;
}

inline void write_cacc_table_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  write_csv_header(os, {"variant", "runs", "avg_delay", "avg_speed", "stops", "total_delay", "pct_diff",
                        "headway_var"});
  for (const auto& r : rows)
    os << (CsvRow() << r.variant << r.runs << r.avg_delay << r.avg_speed << r.stops << r.total_delay
                    << (r.pct_diff ? *r.pct_diff : std::numeric_limits<double>::quiet_NaN()) << r.headway_var)
              .str()
       << '\n';
}

inline void write_cacc_runs_csv(std::ostream& os, const std::vector<SweepRun>& runs) {
  write_csv_header(os, {"variant", "seed", "ok", "avg_delay", "avg_speed", "stops", "total_delay", "pct_diff",
                        "traversals", "headway_mean", "headway_var", "min_gap", "min_speed", "error"});
  for (const auto& r : runs) {
    const CaccResult& x = r.result;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CsvRow row;
    row << r.variant << std::to_string(r.seed) << (r.ok ? "1" : "0");
    if (r.ok)
      row << x.avg_delay << x.avg_speed << x.stops << x.total_delay << (x.pct_diff ? *x.pct_diff : nan)
          << x.traversals << x.headway_mean << x.headway_var << x.min_gap << x.min_speed;
    else
      for (int i = 0; i < 10; ++i) row << nan;
    row << r.error;
    os << row.str() << '\n';
  }
}

/// Fixed-bin densities of per-traversal delay (s), headway (s) and speed (km/h);
/// the runs must have been made with keep_samples.
inline void write_cacc_density_csv(std::ostream& os, const std::string& variant, const CaccResult& r) {
  struct Spec {
    const char* name;
    const std::vector<double>* x;
    double width;
    std::size_t bins;
  };
  const Spec specs[] = {{"delay", &r.delays, 0.1, 100}, {"headway", &r.headways, 0.01, 200},
                        {"speed", &r.speeds, 1.0, 200}};
  for (const auto& s : specs) {
    std::vector<std::size_t> count(s.bins + 1, 0);  // last bin: overflow
    for (double v : *s.x) {
      const auto b = static_cast<std::size_t>(std::max(0.0, std::floor(v / s.width)));
      ++count[std::min(b, s.bins)];
    }
    for (std::size_t b = 0; b <= s.bins; ++b) {
      if (!count[b]) continue;
      const double lo = static_cast<double>(b) * s.width;
      const double hi = b == s.bins ? std::numeric_limits<double>::infinity() : lo + s.width;
      os << (CsvRow() << variant << s.name << lo << (std::isinf(hi) ? std::string("inf") : fmt_num(hi)) << count[b]
                      << static_cast<double>(count[b]) / static_cast<double>(s.x->size()))
                .str()
         << '\n';
    }
  }
}

inline void write_density_header(std::ostream& os) {
  write_csv_header(os, {"variant", "measure", "bin_lo", "bin_hi", "count", "share"});
}

inline void write_trajectory_csv(std::ostream& os, const TrajectorySink& points) {
  write_csv_header(os, {"t", "vehicle", "position", "speed", "broadcast"});
  for (const auto& p : points)
    os << (CsvRow() << p.t << std::to_string(p.vehicle) << p.position << p.speed << p.broadcast).str() << '\n';
}

}  // namespace cvbn
