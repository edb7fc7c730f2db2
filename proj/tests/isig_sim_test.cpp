#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "cvbn/isig_sim.hpp"

namespace cvbn {
namespace {

IntersectionConfig at(double vph) {
  IntersectionConfig c;
  c.volume = vph;
  return c;
}

NetworkConfig grid_at(double vph) {
  NetworkConfig g;
  g.signal.volume = vph;
  return g;
}

const ServicePerturbation& with_sensor() {
  static const ServicePerturbation p = make_perturbation({0.93, 0.0685, 0.00051, 0.0005, 0.00049});
  return p;
}

const ServicePerturbation& without_sensor() {
  static const ServicePerturbation p = make_perturbation({0.727, 0.261, 0.00035, 0.00046, 0.00034});
  return p;
}

bool conserved(const SimResult& r) {
  return r.entered == r.exited + r.queued_at_end + r.in_transit_at_end;
}

TEST(IsigSim, CapacityPerCycleIs23) {
  EXPECT_EQ(cycle_capacity(IntersectionConfig{}, 1.95), 23u);
  EXPECT_EQ(cycle_capacity(IntersectionConfig{}, 2.60), 17u);
  EXPECT_EQ(cycle_capacity(IntersectionConfig{}, 19.5), 2u);
  const SimResult r = run_isolated(at(500), std::nullopt, 3600.0, 1);
  EXPECT_DOUBLE_EQ(r.approaches[0].capacity, 40.0 * 23.0);
}

// Under heavy demand every green discharges exactly 23 vehicles.
TEST(IsigSim, SaturatedGreensServe23) {
  std::vector<TraceEvent> trace;
  run_isolated(at(2000), std::nullopt, 3600.0, 4, &trace);
  std::map<std::pair<std::uint32_t, long>, int> starts;
  for (const auto& e : trace)
    if (e.kind == TraceKind::Start) ++starts[{e.approach, std::lround(std::floor(e.time / 90.0))}];
  ASSERT_FALSE(starts.empty());
  int full = 0;
  for (const auto& [key, n] : starts) {
    EXPECT_LE(n, 23);
    full += n == 23;
  }
  EXPECT_GE(full, 70);
}

TEST(IsigSim, LightVolumeUtilization) {
  double u = 0.0, q = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const SimResult r = run_isolated(at(500), std::nullopt, 3600.0, s);
    u += r.aggregate.utilization / 10.0;
    q += r.aggregate.avg_queue / 10.0;
  }
  EXPECT_NEAR(u, 500.0 / 920.0, 0.04);
  EXPECT_LT(q, 5.0);
}

TEST(IsigSim, SaturatedQueueGrows) {
  double early = 0.0, late = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    early += static_cast<double>(run_isolated(at(1000), std::nullopt, 1800.0, s).queued_at_end);
    late += static_cast<double>(run_isolated(at(1000), std::nullopt, 3600.0, s).queued_at_end);
  }
  EXPECT_GT(late, early);
  const SimResult r = run_isolated(at(1000), std::nullopt, 3600.0, 2);
  EXPECT_NEAR(r.aggregate.utilization, 1000.0 / 920.0, 0.1);
}

TEST(IsigSim, ZeroVolumeIsAllZero) {
  for (const SimResult& r : {run_isolated(at(0), with_sensor(), 3600.0, 3),
                             run_network(grid_at(0), without_sensor(), 3600.0, 3)}) {
    EXPECT_EQ(r.entered, 0u);
    EXPECT_EQ(r.aggregate.avg_queue, 0.0);
    EXPECT_EQ(r.aggregate.max_queue, 0.0);
    EXPECT_EQ(r.aggregate.avg_delay, 0.0);
    EXPECT_EQ(r.aggregate.utilization, 0.0);
  }
}

TEST(IsigSim, FlowIsConservedExactly) {
  for (double v : {300.0, 900.0, 1700.0})
    for (std::uint64_t s : {1u, 2u}) {
      EXPECT_TRUE(conserved(run_isolated(at(v), std::nullopt, 3600.0, s)));
      EXPECT_TRUE(conserved(run_isolated(at(v), without_sensor(), 3600.0, s)));
      const SimResult n = run_network(grid_at(v), with_sensor(), 3600.0, s);
      EXPECT_TRUE(conserved(n));
      EXPECT_GT(n.in_transit_at_end + n.queued_at_end, 0u);
    }
}

TEST(IsigSim, TracesAreFifoAndWorkConserving) {
  for (double v : {600.0, 1200.0}) {
    std::vector<TraceEvent> trace;
    run_isolated(at(v), without_sensor(), 3600.0, 5, &trace);
    EXPECT_EQ(check_trace(trace, IntersectionConfig{}, 3600.0), std::vector<std::string>{});
    trace.clear();
    run_network(grid_at(v), without_sensor(), 3600.0, 5, &trace);
    EXPECT_EQ(check_trace(trace, IntersectionConfig{}, 3600.0), std::vector<std::string>{});
  }
}

// Blocked heads appear only when a long discharge time cannot finish in green.
TEST(IsigSim, HeavyPerturbationBlocksOnlyWhenNoFit) {
  ServicePerturbation p = make_perturbation({0.0, 0.0, 0.0, 0.0, 1.0});
  std::vector<TraceEvent> trace;
  run_isolated(at(800), p, 3600.0, 9, &trace);
  int blocked = 0;
  for (const auto& e : trace)
    if (e.kind == TraceKind::Blocked) {
      ++blocked;
      EXPECT_GT(e.service, e.remaining);
    }
  EXPECT_GT(blocked, 0);
  EXPECT_TRUE(check_trace(trace, IntersectionConfig{}, 3600.0).empty());
}

TEST(IsigSim, CheckerCatchesFifoViolation) {
  std::vector<TraceEvent> trace;
  run_isolated(at(900), std::nullopt, 600.0, 2, &trace);
  for (auto& e : trace)
    if (e.kind == TraceKind::Start) {
      e.vehicle += 1000;
      break;
    }
  EXPECT_FALSE(check_trace(trace, IntersectionConfig{}, 600.0).empty());
}

TEST(IsigSim, CheckerCatchesIdleServer) {
  std::vector<TraceEvent> trace;
  run_isolated(at(900), std::nullopt, 600.0, 2, &trace);
  // drop the first start: the vehicle then sits in a green, idle lane
  for (auto it = trace.begin(); it != trace.end(); ++it)
    if (it->kind == TraceKind::Start) {
      const auto vehicle = it->vehicle;
      trace.erase(it);
      std::erase_if(trace, [&](const TraceEvent& e) { return e.kind == TraceKind::Depart && e.vehicle == vehicle; });
      break;
    }
  EXPECT_FALSE(check_trace(trace, IntersectionConfig{}, 600.0).empty());
}

TEST(IsigSim, SameSeedSameTrace) {
  const SimResult a = run_network(grid_at(900), without_sensor(), 3600.0, 12);
  const SimResult b = run_network(grid_at(900), without_sensor(), 3600.0, 12);
  const SimResult c = run_network(grid_at(900), without_sensor(), 3600.0, 13);
  EXPECT_EQ(a.trace_hash, b.trace_hash);
  EXPECT_EQ(a.aggregate.avg_delay, b.aggregate.avg_delay);
  EXPECT_NE(a.trace_hash, c.trace_hash);
}

TEST(IsigSim, ServedVehiclesWaitAtLeastOneDischarge) {
  const SimResult r = run_network(grid_at(700), with_sensor(), 3600.0, 3);
  for (const auto& a : r.approaches) {
    if (a.departures == 0) continue;
    EXPECT_GE(a.avg_delay_served, 1.95);
    EXPECT_GE(a.max_queue, a.avg_queue);
    EXPECT_GE(a.avg_queue, 0.0);
  }
}

// Same arrivals, slower discharge: baseline <= with sensor <= without sensor.
// Pathwise against the baseline; the two sensor vectors are not exactly
// stochastically ordered (with-sensor has slightly more mass above "low"), so
// that pair is compared over seeds.
TEST(IsigSim, PerturbationDominance) {
  for (double v : {700.0, 900.0, 1300.0}) {
    double base = 0.0, with = 0.0, without = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const double b = run_isolated(at(v), std::nullopt, 3600.0, s).aggregate.avg_delay;
      const double w = run_isolated(at(v), with_sensor(), 3600.0, s).aggregate.avg_delay;
      const double wo = run_isolated(at(v), without_sensor(), 3600.0, s).aggregate.avg_delay;
      EXPECT_GE(w, b - 1e-9) << "seed " << s;
      EXPECT_GE(wo, b - 1e-9) << "seed " << s;
      base += b;
      with += w;
      without += wo;
    }
    EXPECT_LE(base, with);
    EXPECT_LE(with, without);
  }
}

TEST(IsigSim, DelayAndQueueMonotoneInVolume) {
  ScanConfig c;
  c.volumes = volume_range(500, 2000, 100);
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const ScanResult r = saturation_scan(c);
  EXPECT_TRUE(r.conserved);
  const std::size_t nv = c.volumes.size();
  for (std::size_t s = 0; s < c.scenarios.size(); ++s)
    for (std::size_t v = 1; v < nv; ++v) {
      EXPECT_GE(r.aggregate[s * nv + v].avg_delay, r.aggregate[s * nv + v - 1].avg_delay);
      EXPECT_GE(r.aggregate[s * nv + v].avg_queue, r.aggregate[s * nv + v - 1].avg_queue);
    }
  ASSERT_EQ(r.deltas.size(), 2u);
  EXPECT_EQ(r.deltas[0].scenario, "with-sensor");
  EXPECT_GT(r.deltas[1].pct.avg_delay, r.deltas[0].pct.avg_delay);
}

// Boundary and mid-block sources keep every approach near the configured
// volume while the network is undersaturated.
TEST(IsigSim, NetworkVolumesMatchConfiguration) {
  double total = 0.0;
  const SimResult r = run_network(grid_at(400), std::nullopt, 4 * 3600.0, 6);
  ASSERT_EQ(r.approaches.size(), 50u);
  for (const auto& a : r.approaches) total += static_cast<double>(a.arrivals);
  EXPECT_NEAR(total / 50.0 / 4.0, 400.0, 12.0);
  EXPECT_EQ(r.intersections.size(), 25u);
}

TEST(IsigSim, OverflowFlagOnly) {
  const SimResult light = run_isolated(at(500), std::nullopt, 3600.0, 1);
  const SimResult heavy = run_isolated(at(2000), std::nullopt, 3600.0, 1);
  EXPECT_FALSE(light.approaches[0].overflow);
  EXPECT_TRUE(heavy.approaches[0].overflow);
  EXPECT_GT(heavy.aggregate.max_queue, 130.0);
}

TEST(IsigSim, PerturbationInputChecks) {
  const ServicePerturbation p = without_sensor();
  double total = 0.0;
  for (double x : p.probs) total += x;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(make_perturbation({0.5, 0.2, 0.0, 0.0, 0.0}), Error);
  EXPECT_THROW(make_perturbation({0.5, 0.5}), Error);
  IntersectionConfig bad;
  bad.green = 40.0;
  EXPECT_THROW(run_isolated(bad, std::nullopt, 3600.0, 1), Error);
}

TEST(IsigSim, CsvColumns) {
  ScanConfig c;
  c.volumes = {500};
  c.seeds = {1};
  std::ostringstream os, d;
  const ScanResult r = saturation_scan(c);
  write_sim_csv(os, r.rows);
  write_sim_deltas_csv(d, r.deltas);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "scenario,volume,intersection,approach,avg_queue,max_queue,avg_delay,utilization");
  EXPECT_NE(os.str().find("\nbaseline,500,all,all,"), std::string::npos);
  EXPECT_EQ(d.str().substr(0, d.str().find('\n')),
            "scenario,delay_abs,queue_abs,max_queue_abs,delay_pct,queue_pct,max_queue_pct");
}

}  // namespace
}  // namespace cvbn
