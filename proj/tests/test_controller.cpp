#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "optonet/controller.hpp"
#include "optonet/errors.hpp"
#include "optonet/matching.hpp"
#include "optonet/routing.hpp"
#include "optonet/topo.hpp"

using namespace optonet;

TEST_CASE("guardband arithmetic") {
  // Rotation variance 34 ns, 725 B estimator error at 100 Gbps (58 ns),
  // 28 ns sync error counted twice, 52 ns headroom.
  auto r = guardband_calc(34, 725, 100'000'000'000, 28, 52);
  CHECK(r.raw_ns == 148);
  CHECK(r.guardband_ns == 200);
  CHECK(r.min_slice_ns == 2000);

  auto zero = guardband_calc(0, 0, 100'000'000'000, 0, 0);
  CHECK(zero.guardband_ns == 0);
  CHECK(zero.min_slice_ns == 0);

  auto est = guardband_calc(0, 1250, 100'000'000'000, 0, 0);
  CHECK(est.raw_ns == 100);
  CHECK(est.min_slice_ns == 1000);

  CHECK_THROWS_AS(guardband_calc(-1, 0, 1, 0, 0), SchemaError);
}

namespace {

struct DeployEvent {
  Nanos t;
  std::string kind;
  int epoch;
};

std::vector<DeployEvent> deploy_events(const std::string& trace) {
  std::vector<DeployEvent> out;
  std::istringstream in(trace);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    DeployEvent e;
    long node, port, queue;
    ls >> e.t >> e.kind >> node >> port >> queue >> e.epoch;
    if (e.kind == "deploy_routing" || e.kind == "deploy_topo" ||
        e.kind == "retire")
      out.push_back(e);
  }
  return out;
}

std::vector<FlowSpec> steady_flows(std::size_t hosts, int count,
                                   Nanos spacing) {
  std::vector<FlowSpec> flows;
  optonet::testing::TestRng rng(13);
  for (int i = 0; i < count; ++i) {
    HostId s = static_cast<HostId>(rng.below(hosts));
    HostId d = static_cast<HostId>(rng.below(hosts));
    if (s == d) d = static_cast<HostId>((d + 1) % hosts);
    flows.push_back({static_cast<std::uint64_t>(i + 1), s, d,
                     3000 + rng.below(9000), static_cast<Nanos>(i) * spacing});
  }
  return flows;
}

}  // namespace

TEST_CASE("ta loop deploys routing before the topology switch") {
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 2;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.propagation_delay_ns = 300;
  cfg.reaction = CongestionReaction::Defer;

  // Static mesh with wcmp, reshaped by a fresh matching every interval.
  auto mesh = jupiter_evolve(std::nullopt, std::nullopt, 0, 4, 2);
  OpticalSchedule topo = OpticalSchedule::single(4, mesh);
  auto tables =
      deploy_routing(static_paths(mesh, 4, StaticMode::Ecmp, 0, std::nullopt),
                     LookupMode::PerHop, MultipathPolicy::PerFlow, topo);

  Simulator sim(cfg);
  std::ostringstream trace;
  sim.enable_trace(&trace);
  sim.preload(topo, tables);
  sim.set_workload(steady_flows(4, 150, 2000));
  run_ta_loop(sim, 100'000,
              [&](const TrafficMatrix& tm, const OpticalSchedule&) {
                DeployPlan plan;
                TrafficMatrix use = tm;
                auto circuits = jupiter_evolve(use, mesh, 2, 4, 2);
                OpticalSchedule next = OpticalSchedule::single(4, circuits);
                plan.tables = deploy_routing(
                    static_paths(circuits, 4, StaticMode::Ecmp, 0, std::nullopt),
                    LookupMode::PerHop, MultipathPolicy::PerFlow, next);
                plan.schedule = std::move(next);
                return plan;
              });
  Metrics m = sim.run();
  CHECK(m.ta_iterations >= 1);
  CHECK(m.ta_aborted == 0);

  auto events = deploy_events(trace.str());
  std::map<int, Nanos> routing_at, topo_at, retire_at;
  for (const DeployEvent& e : events) {
    if (e.kind == "deploy_routing") routing_at[e.epoch] = e.t;
    if (e.kind == "deploy_topo") topo_at[e.epoch] = e.t;
    if (e.kind == "retire") retire_at[e.epoch] = e.t;
  }
  // In every iteration the new entries land before (or with) the circuits,
  // and the stale epoch retires one propagation delay after the switch.
  for (const auto& [epoch, t_topo] : topo_at) {
    if (epoch == 0) continue;
    REQUIRE(routing_at.count(epoch));
    CHECK(routing_at[epoch] <= t_topo);
    REQUIRE(retire_at.count(epoch - 1));
    CHECK(retire_at[epoch - 1] == t_topo + cfg.propagation_delay_ns);
  }
}

TEST_CASE("pure to runs never deploy after time zero") {
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 1;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.reaction = CongestionReaction::Defer;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(vlb(sched), LookupMode::PerHop,
                               MultipathPolicy::PerPacket, sched);
  Simulator sim(cfg);
  std::ostringstream trace;
  sim.enable_trace(&trace);
  preload_to(sim, sched, tables);
  sim.set_workload(steady_flows(4, 100, 3000));
  Metrics m = sim.run();
  CHECK(m.delivered_packets > 0);
  for (const DeployEvent& e : deploy_events(trace.str())) CHECK(e.t == 0);
}

TEST_CASE("an interval longer than the run leaves zero reconfigurations") {
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 1;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.reaction = CongestionReaction::Defer;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(direct_route(sched), LookupMode::PerHop,
                               MultipathPolicy::None, sched);
  Simulator sim(cfg);
  sim.preload(sched, tables);
  sim.set_workload(steady_flows(4, 20, 1000));
  int calls = 0;
  sim.set_ta_loop(3'600'000'000LL, [&](const TrafficMatrix&,
                                       const OpticalSchedule&) {
    ++calls;
    return DeployPlan{};
  });
  Metrics m = sim.run();
  CHECK(calls == 0);
  CHECK(m.ta_iterations == 0);
  CHECK(m.delivered_packets > 0);
}

TEST_CASE("ta loop swaps a rotating schedule at a slice boundary") {
  // Semi-oblivious style: a demand-skewed round robin replaces the plain
  // one mid-run; packets keep flowing.
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 1;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.reaction = CongestionReaction::Defer;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(vlb(sched), LookupMode::PerHop,
                               MultipathPolicy::PerPacket, sched);
  Simulator sim(cfg);
  std::ostringstream trace;
  sim.enable_trace(&trace);
  sim.preload(sched, tables);
  sim.set_workload(steady_flows(4, 200, 1500));
  sim.set_ta_loop(120'000, [&](const TrafficMatrix& tm, const OpticalSchedule&) {
    DeployPlan plan;
    OpticalSchedule next = sorn(tm, 4, 1, 1);
    plan.tables = deploy_routing(vlb(next), LookupMode::PerHop,
                                 MultipathPolicy::PerPacket, next);
    plan.schedule = std::move(next);
    return plan;
  });
  Metrics m = sim.run();
  CHECK(m.ta_iterations >= 1);
  CHECK(m.ta_aborted == 0);
  CHECK(m.injected_packets == m.delivered_packets + m.dropped_packets);
  for (const DeployEvent& e : deploy_events(trace.str()))
    if (e.kind == "deploy_topo" && e.epoch > 0)
      CHECK(e.t % cfg.slice_duration_ns == 0);  // boundary-aligned swap
}

TEST_CASE("a failing iteration aborts without killing the loop") {
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 1;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.reaction = CongestionReaction::Defer;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(direct_route(sched), LookupMode::PerHop,
                               MultipathPolicy::None, sched);
  Simulator sim(cfg);
  sim.preload(sched, tables);
  sim.set_workload(steady_flows(4, 300, 2000));
  int calls = 0;
  sim.set_ta_loop(100'000, [&](const TrafficMatrix&, const OpticalSchedule&) {
    ++calls;
    if (calls == 1) throw InfeasibleTopologyError("bad plan");
    return DeployPlan{};
  });
  Metrics m = sim.run();
  CHECK(m.ta_aborted == 1);
  CHECK(m.ta_iterations >= 2);
}
