#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "optonet/errors.hpp"
#include "optonet/routing.hpp"
#include "optonet/sim.hpp"
#include "optonet/topo.hpp"
#include "optonet/workload.hpp"

using namespace optonet;

namespace {

SimConfig capacity(std::size_t nodes, std::size_t uplinks) {
  SimConfig c;
  c.node_count = nodes;
  c.uplinks = uplinks;
  c.hosts_per_node = 1;
  c.link_bandwidth_bps = 100'000'000'000;
  return c;
}

}  // namespace

TEST_CASE("zero load generates no flows") {
  auto dist = SizeDistribution::builtin("rpc-like");
  CHECK(gen_flows(dist, 0.0, 1'000'000, capacity(6, 1), 1).empty());
}

TEST_CASE("degenerate single-size cdf samples that size exactly") {
  auto dist = SizeDistribution::from_points({{4096, 1.0}});
  CHECK(dist.mean_bytes() == 4096.0);
  auto flows = gen_flows(dist, 0.3, 2'000'000, capacity(4, 1), 7);
  REQUIRE(!flows.empty());
  for (const FlowSpec& f : flows) CHECK(f.size_bytes == 4096);
}

TEST_CASE("flow count tracks the poisson rate within three sigma") {
  // 0.4 load on 6x100 Gbps of core capacity with 100 KB mean flows over
  // 10 ms: lambda*T = 0.4 * 75 B/ns / 1e5 B * 1e7 ns = 3000 flows.
  auto dist = SizeDistribution::from_points({{100000, 1.0}});
  auto flows = gen_flows(dist, 0.4, 10'000'000, capacity(6, 1), 42);
  double expected = 0.4 * (600e9 / 8 / 1e9) / 1e5 * 1e7;
  double sigma = std::sqrt(expected);
  CHECK(std::abs(static_cast<double>(flows.size()) - expected) <= 3 * sigma);

  // Arrivals sorted, hosts distinct, sizes positive.
  for (std::size_t i = 0; i < flows.size(); ++i) {
    CHECK(flows[i].src_host != flows[i].dst_host);
    CHECK(flows[i].size_bytes >= 1);
    if (i > 0)
      CHECK(flows[i].arrival_time_ns >= flows[i - 1].arrival_time_ns);
  }
}

TEST_CASE("generation is deterministic per seed") {
  auto dist = SizeDistribution::builtin("kv-like");
  auto a = gen_flows(dist, 0.2, 1'000'000, capacity(4, 1), 5);
  auto b = gen_flows(dist, 0.2, 1'000'000, capacity(4, 1), 5);
  auto c = gen_flows(dist, 0.2, 1'000'000, capacity(4, 1), 6);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].arrival_time_ns == b[i].arrival_time_ns);
    CHECK(a[i].size_bytes == b[i].size_bytes);
    CHECK(a[i].src_host == b[i].src_host);
  }
  CHECK(a.size() != c.size());  // different seed, different draw
}

TEST_CASE("sampled sizes converge to the input cdf") {
  auto dist = SizeDistribution::builtin("rpc-like");
  auto flows = gen_flows(dist, 0.5, 40'000'000, capacity(8, 1), 11);
  REQUIRE(flows.size() >= 100000);
  std::map<std::uint64_t, std::size_t> counts;
  for (const FlowSpec& f : flows) counts[f.size_bytes]++;
  double n = static_cast<double>(flows.size());
  double cum = 0, ks = 0;
  for (const auto& [size, p] : dist.points()) {
    cum += static_cast<double>(counts[size]);
    // Kolmogorov-Smirnov distance at each atom of the cdf.
    ks = std::max(ks, std::abs(cum / n - p));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("cdf files and csv round trips") {
  CHECK_THROWS_AS(SizeDistribution::from_points({{100, 0.5}}), SchemaError);
  CHECK_THROWS_AS(SizeDistribution::from_points({{100, 0.9}, {50, 1.0}}),
                  SchemaError);
  CHECK_THROWS_AS(SizeDistribution::builtin("nope"), SchemaError);

  std::vector<FlowSpec> flows{{1, 0, 5, 1234, 999}, {2, 3, 1, 42, 0}};
  auto text = flows_to_csv(flows);
  auto back = flows_from_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].flow_id == 1);
  CHECK(back[0].dst_host == 5);
  CHECK(back[1].size_bytes == 42);
}

TEST_CASE("collect aggregates offered bytes per node pair") {
  // One megabyte from a host under node 0 to a host under node 2, observed
  // through the TA collection loop.
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 3;
  cfg.hosts_per_node = 1;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.propagation_delay_ns = 100;
  cfg.reaction = CongestionReaction::Defer;
  cfg.seed = 2;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(direct_route(sched), LookupMode::PerHop,
                               MultipathPolicy::None, sched);

  std::vector<TrafficMatrix> collected;
  Simulator sim(cfg);
  sim.preload(sched, tables);
  FlowSpec f;
  f.flow_id = 1;
  f.src_host = 0;
  f.dst_host = 2;
  f.size_bytes = 1'000'000;
  f.arrival_time_ns = 10;
  // A late keep-alive flow holds the run open past the collection window.
  FlowSpec tail;
  tail.flow_id = 2;
  tail.src_host = 3;
  tail.dst_host = 1;
  tail.size_bytes = 100;
  tail.arrival_time_ns = 450'000;
  sim.set_workload({f, tail});
  sim.set_ta_loop(200'000, [&](const TrafficMatrix& tm, const OpticalSchedule&) {
    collected.push_back(tm);
    return DeployPlan{};  // observe only
  });
  sim.run();
  REQUIRE(collected.size() >= 2);
  double total02 = 0, rest = 0;
  for (std::size_t w = 0; w < 2; ++w)  // windows that cover the megabyte flow
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        (i == 0 && j == 2 ? total02 : rest) += collected[w].at(i, j);
  CHECK(total02 == 1'000'000.0);
  CHECK(rest == 0.0);
}

TEST_CASE("collect row sums equal offered bytes and repeat for repeated traffic") {
  SimConfig cfg;
  cfg.node_count = 4;
  cfg.uplinks = 3;
  cfg.hosts_per_node = 2;
  cfg.slice_duration_ns = 2000;
  cfg.guardband_ns = 200;
  cfg.propagation_delay_ns = 100;
  cfg.reaction = CongestionReaction::Defer;
  auto sched = round_robin(4, 1);
  auto tables = deploy_routing(direct_route(sched), LookupMode::PerHop,
                               MultipathPolicy::None, sched);

  // Identical traffic in two consecutive 100 us intervals, plus a late
  // keep-alive so both windows close before the run drains.
  std::vector<FlowSpec> flows;
  std::uint64_t id = 1;
  for (Nanos base : {Nanos{0}, Nanos{100'000}}) {
    flows.push_back({id++, 0, 2, 30000, base + 10});
    flows.push_back({id++, 1, 5, 20000, base + 50});
    flows.push_back({id++, 6, 3, 10000, base + 90});
  }
  flows.push_back({id++, 4, 7, 100, 250'000});
  std::vector<TrafficMatrix> collected;
  Simulator sim(cfg);
  sim.preload(sched, tables);
  sim.set_workload(flows);
  sim.set_ta_loop(100'000, [&](const TrafficMatrix& tm, const OpticalSchedule&) {
    collected.push_back(tm);
    return DeployPlan{};
  });
  sim.run();
  REQUIRE(collected.size() >= 2);
  CHECK(collected[0] == collected[1]);  // stationary traffic, equal windows
  // Row sums equal per-node offered bytes, exactly.
  CHECK(collected[0].row_sum(0) == 50000.0);  // hosts 0 and 1 sit under node 0
  CHECK(collected[0].row_sum(3) == 10000.0);
  CHECK(collected[0].col_sum(1) == 40000.0);  // hosts 2 and 3
  CHECK(collected[0].col_sum(2) == 20000.0);  // host 5
}
