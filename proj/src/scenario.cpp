#include "optonet/scenario.hpp"

#include <fstream>
#include <mutex>

#include "optonet/errors.hpp"
#include "optonet/matching.hpp"
#include "optonet/topo.hpp"

namespace optonet {

namespace {

std::map<std::string, TopoGenerator>& registry() {
  static std::map<std::string, TopoGenerator> r;
  return r;
}
std::mutex registry_mu;

}  // namespace

void register_topo_generator(const std::string& name, TopoGenerator gen) {
  std::lock_guard<std::mutex> lock(registry_mu);
  registry()[name] = std::move(gen);
}

Json simconfig_to_json(const SimConfig& c) {
  Json j;
  j["node_num"] = c.node_count;
  j["uplink"] = c.uplinks;
  j["hosts_per_node"] = c.hosts_per_node;
  j["link_bandwidth_bps"] = c.link_bandwidth_bps;
  j["slice_duration_ns"] = c.slice_duration_ns;
  j["guardband_ns"] = c.guardband_ns;
  j["queues_per_port"] = c.queues_per_port;
  j["update_interval_ns"] = c.update_interval_ns;
  j["congestion_threshold_bytes"] = c.congestion_threshold_bytes;
  j["rotation_jitter_ns"] = Json::array({c.rotation_jitter_min_ns,
                                         c.rotation_jitter_max_ns});
  j["sync_error_ns"] = c.sync_error_ns;
  j["propagation_delay_ns"] = c.propagation_delay_ns;
  j["mtu_bytes"] = c.mtu_bytes;
  j["switch_buffer_bytes"] = c.switch_buffer_bytes;
  j["services"] = {{"congestion_detection", c.services.congestion_detection},
                   {"pushback", c.services.pushback},
                   {"offloading", c.services.offloading},
                   {"flow_pausing", c.services.flow_pausing}};
  j["congestion_reaction"] =
      c.reaction == CongestionReaction::Defer ? "defer" : "drop";
  j["elephant_threshold_bytes"] = c.elephant_threshold_bytes;
  j["notify_lead_ns"] = c.notify_lead_ns;
  j["seed"] = c.seed;
  j["horizon_ns"] = c.horizon_ns;
  return j;
}

SimConfig simconfig_from_json(const Json& j) {
  SimConfig c;
  try {
    c.node_count = j.value("node_num", j.value("node_count", c.node_count));
    c.uplinks = j.value("uplink", j.value("uplinks", c.uplinks));
    c.hosts_per_node = j.value("hosts_per_node", c.hosts_per_node);
    c.link_bandwidth_bps = j.value("link_bandwidth_bps", c.link_bandwidth_bps);
    c.slice_duration_ns = j.value("slice_duration_ns", c.slice_duration_ns);
    c.guardband_ns = j.value("guardband_ns", c.guardband_ns);
    c.queues_per_port = j.value("queues_per_port", c.queues_per_port);
    c.update_interval_ns = j.value("update_interval_ns", c.update_interval_ns);
    c.congestion_threshold_bytes =
        j.value("congestion_threshold_bytes", c.congestion_threshold_bytes);
    if (j.contains("rotation_jitter_ns")) {
      c.rotation_jitter_min_ns = j["rotation_jitter_ns"].at(0).get<Nanos>();
      c.rotation_jitter_max_ns = j["rotation_jitter_ns"].at(1).get<Nanos>();
    }
    c.sync_error_ns = j.value("sync_error_ns", c.sync_error_ns);
    c.propagation_delay_ns =
        j.value("propagation_delay_ns", c.propagation_delay_ns);
    c.mtu_bytes = j.value("mtu_bytes", c.mtu_bytes);
    c.switch_buffer_bytes = j.value("switch_buffer_bytes", c.switch_buffer_bytes);
    if (j.contains("services")) {
      const Json& s = j["services"];
      c.services.congestion_detection =
          s.value("congestion_detection", c.services.congestion_detection);
      c.services.pushback = s.value("pushback", c.services.pushback);
      c.services.offloading = s.value("offloading", c.services.offloading);
      c.services.flow_pausing = s.value("flow_pausing", c.services.flow_pausing);
    }
    std::string re = j.value("congestion_reaction", "drop");
    if (re == "defer")
      c.reaction = CongestionReaction::Defer;
    else if (re == "drop")
      c.reaction = CongestionReaction::Drop;
    else
      throw SchemaError("unknown congestion_reaction: " + re);
    c.elephant_threshold_bytes =
        j.value("elephant_threshold_bytes", c.elephant_threshold_bytes);
    c.notify_lead_ns = j.value("notify_lead_ns", c.notify_lead_ns);
    c.seed = j.value("seed", c.seed);
    c.horizon_ns = j.value("horizon_ns", c.horizon_ns);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("bad sim config: ") + e.what());
  }
  c.validate();
  return c;
}

Scenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("scenario must be a JSON object");
  Scenario sc;
  sc.name = j.value("name", sc.name);
  sc.sim = simconfig_from_json(j.value("sim", Json::object()));
  sc.topo = j.value("topo", Json{{"algo", "round_robin"}});
  sc.routing = j.value("routing", Json{{"algo", "direct"}});
  sc.workload = j.value("workload", Json::object());
  sc.workflow = j.value("workflow", "to");
  if (sc.workflow != "to" && sc.workflow != "ta" && sc.workflow != "hybrid")
    throw SchemaError("workflow must be to|ta|hybrid");
  if (j.contains("ta")) sc.ta_interval_ns = j["ta"].value("interval_ns", Nanos{0});
  if (sc.workflow == "ta" && sc.ta_interval_ns <= 0)
    throw SchemaError("ta workflow needs ta.interval_ns > 0");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("scenario is not valid json: ") + e.what());
  }
  return scenario_from_json(j);
}

Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["name"] = sc.name;
  j["sim"] = simconfig_to_json(sc.sim);
  j["topo"] = sc.topo;
  j["routing"] = sc.routing;
  j["workload"] = sc.workload;
  j["workflow"] = sc.workflow;
  if (sc.ta_interval_ns > 0) j["ta"] = {{"interval_ns", sc.ta_interval_ns}};
  return j;
}

OpticalSchedule build_topology(const Scenario& sc, const TrafficMatrix& tm,
                               const OpticalSchedule* prev) {
  const SimConfig& cfg = sc.sim;
  std::string algo = sc.topo.value("algo", "round_robin");
  std::size_t uplinks = sc.topo.value("uplink", cfg.uplinks);
  OpticalSchedule s;
  if (algo == "round_robin") {
    s = round_robin(cfg.node_count, uplinks);
  } else if (algo == "multidim_round_robin") {
    s = multidim_round_robin(sc.topo.value("side", std::size_t{4}),
                             sc.topo.value("dims", std::size_t{1}), uplinks);
  } else if (algo == "explicit") {
    if (sc.topo.contains("schedule")) {
      Json sj = sc.topo["schedule"];
      if (!sj.contains("node_count")) sj["node_count"] = cfg.node_count;
      s = schedule_from_json(sj);
    } else if (sc.topo.contains("file")) {
      std::ifstream in(sc.topo["file"].get<std::string>());
      if (!in) throw SchemaError("cannot open schedule file");
      Json sj;
      in >> sj;
      s = schedule_from_json(sj);
    } else {
      throw SchemaError("explicit topo needs \"schedule\" or \"file\"");
    }
  } else if (algo == "edmonds") {
    TrafficMatrix use = tm.size() == cfg.node_count ? tm
                                                    : TrafficMatrix(cfg.node_count);
    s = OpticalSchedule::single(cfg.node_count, edmonds_matching(use));
  } else if (algo == "bvn") {
    TrafficMatrix use = tm.size() == cfg.node_count ? tm
                                                    : TrafficMatrix(cfg.node_count);
    s = bvn_schedule(use, sc.topo.value("total_slices",
                                        std::size_t{cfg.node_count}));
  } else if (algo == "jupiter") {
    std::optional<TrafficMatrix> use;
    if (tm.size() == cfg.node_count) use = tm;
    std::optional<std::vector<Circuit>> prev_circuits;
    if (prev && prev->static_topology) prev_circuits = prev->slices[0];
    auto circuits =
        jupiter_evolve(use, prev_circuits, sc.topo.value("change_budget", 8),
                       cfg.node_count, uplinks);
    s = OpticalSchedule::single(cfg.node_count, std::move(circuits));
  } else if (algo == "sorn") {
    TrafficMatrix use = tm.size() == cfg.node_count ? tm
                                                    : TrafficMatrix(cfg.node_count);
    s = sorn(use, cfg.node_count, uplinks, sc.topo.value("dup_top", std::size_t{2}));
  } else {
    std::lock_guard<std::mutex> lock(registry_mu);
    auto it = registry().find(algo);
    if (it == registry().end()) throw SchemaError("unknown topo algo: " + algo);
    s = it->second(sc.topo, cfg, tm, prev);
  }
  s.node_count = cfg.node_count;
  s.slice_duration_ns = cfg.slice_duration_ns;
  s.guardband_ns = cfg.guardband_ns;
  return s;
}

std::map<NodeId, TimeFlowTable> build_routing(const Scenario& sc,
                                              const OpticalSchedule& schedule) {
  std::string algo = sc.routing.value("algo", "direct");
  int max_hop = sc.routing.value("max_hop", static_cast<int>(sc.sim.node_count));
  int k = sc.routing.value("k", 2);
  std::optional<PairList> pairs;
  if (sc.routing.contains("pairs")) {
    PairList p;
    for (const Json& pr : sc.routing["pairs"])
      p.emplace_back(pr.at(0).get<NodeId>(), pr.at(1).get<NodeId>());
    pairs = std::move(p);
  }

  std::vector<Path> paths;
  LookupMode lookup = LookupMode::PerHop;
  MultipathPolicy mp = MultipathPolicy::None;
  if (algo == "direct") {
    paths = direct_route(schedule, pairs);
  } else if (algo == "vlb") {
    paths = vlb(schedule, pairs);
    mp = MultipathPolicy::PerPacket;
  } else if (algo == "opera") {
    paths = opera_paths(schedule, max_hop, pairs);
    lookup = LookupMode::Source;
    mp = MultipathPolicy::PerFlow;
  } else if (algo == "ucmp") {
    paths = ucmp_paths(schedule, max_hop, k, pairs);
    lookup = LookupMode::Source;
    mp = MultipathPolicy::PerPacket;
  } else if (algo == "hoho") {
    paths = hoho_paths(schedule, max_hop, pairs);
  } else if (algo == "explicit") {
    for (const Json& pj : sc.routing.at("paths"))
      paths.push_back(path_from_json(pj));
  } else if (algo == "ecmp" || algo == "wcmp" || algo == "ksp") {
    StaticMode mode = algo == "ecmp"   ? StaticMode::Ecmp
                      : algo == "wcmp" ? StaticMode::Wcmp
                                       : StaticMode::Ksp;
    std::optional<TrafficMatrix> tm;
    if (sc.routing.contains("tm")) tm = tm_from_json(sc.routing["tm"]);
    paths = static_paths(schedule.all_circuits(), schedule.node_count, mode, k,
                         tm, pairs);
    mp = MultipathPolicy::PerFlow;
  } else {
    throw SchemaError("unknown routing algo: " + algo);
  }

  if (sc.routing.contains("lookup")) {
    std::string l = sc.routing["lookup"].get<std::string>();
    if (l == "hop")
      lookup = LookupMode::PerHop;
    else if (l == "source")
      lookup = LookupMode::Source;
    else
      throw SchemaError("lookup must be hop|source");
  }
  if (sc.routing.contains("multipath")) {
    std::string m = sc.routing["multipath"].get<std::string>();
    if (m == "packet")
      mp = MultipathPolicy::PerPacket;
    else if (m == "flow")
      mp = MultipathPolicy::PerFlow;
    else if (m == "none")
      mp = MultipathPolicy::None;
    else
      throw SchemaError("multipath must be packet|flow|none");
  }
  return deploy_routing(paths, lookup, mp, schedule);
}

std::vector<FlowSpec> build_workload(const Scenario& sc) {
  const Json& w = sc.workload;
  if (w.contains("explicit_flows")) {
    std::vector<FlowSpec> flows;
    std::uint64_t id = 1;
    for (const Json& f : w["explicit_flows"]) {
      FlowSpec fs;
      fs.flow_id = id++;
      fs.src_host = f.at(0).get<HostId>();
      fs.dst_host = f.at(1).get<HostId>();
      fs.size_bytes = f.at(2).get<std::uint64_t>();
      fs.arrival_time_ns = f.at(3).get<Nanos>();
      if (fs.src_host == fs.dst_host)
        throw SchemaError("flow src and dst host must differ");
      if (fs.size_bytes < 1) throw SchemaError("flow size must be >= 1");
      flows.push_back(fs);
    }
    return flows;
  }
  if (w.contains("flows_csv")) {
    std::ifstream in(w["flows_csv"].get<std::string>());
    if (!in) throw SchemaError("cannot open flows csv");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return flows_from_csv(text);
  }
  if (!w.contains("load")) return {};
  SizeDistribution dist =
      w.contains("cdf_file")
          ? SizeDistribution::from_file(w["cdf_file"].get<std::string>())
          : SizeDistribution::builtin(w.value("cdf", "rpc-like"));
  auto flows = gen_flows(dist, w.at("load").get<double>(),
                         w.at("duration_ns").get<Nanos>(), sc.sim, sc.sim.seed);
  if (w.contains("hot_pairs")) {
    std::vector<std::pair<NodeId, NodeId>> pairs;
    for (const Json& p : w["hot_pairs"])
      pairs.emplace_back(p.at(0).get<NodeId>(), p.at(1).get<NodeId>());
    skew_flows(flows, sc.sim, pairs, w.value("hot_fraction", 0.5),
               sc.sim.seed);
  }
  return flows;
}

RunOutput run_scenario(const Scenario& sc, std::ostream* trace) {
  if (sc.workflow == "hybrid")
    throw SchemaError("hybrid scenarios are composed by the cli, not run_scenario");
  TrafficMatrix empty;
  OpticalSchedule schedule = build_topology(sc, empty, nullptr);
  auto tables = build_routing(sc, schedule);

  Simulator sim(sc.sim);
  if (trace) sim.enable_trace(trace);
  sim.preload(schedule, tables);
  sim.set_workload(build_workload(sc));
  if (sc.workflow == "ta") {
    Scenario loop_sc = sc;
    sim.set_ta_loop(sc.ta_interval_ns,
                    [loop_sc](const TrafficMatrix& tm,
                              const OpticalSchedule& prev) {
                      DeployPlan plan;
                      OpticalSchedule next =
                          build_topology(loop_sc, tm, &prev);
                      plan.tables = build_routing(loop_sc, next);
                      plan.schedule = std::move(next);
                      return plan;
                    });
  }
  RunOutput out;
  out.metrics = sim.run();
  out.resolved = scenario_to_json(sc);
  return out;
}

std::vector<Finding> validate_scenario(const Scenario& sc) {
  std::vector<Finding> findings;
  auto fail = [&](const std::string& code, const std::string& detail) {
    findings.push_back({"error", code, detail});
  };
  try {
    sc.sim.validate();
  } catch (const Error& e) {
    fail("ConfigInvalid", e.what());
    return findings;
  }
  OpticalSchedule schedule;
  try {
    TrafficMatrix empty;
    schedule = build_topology(sc, empty, nullptr);
    schedule.validate();
    deploy_topo(schedule);
  } catch (const Error& e) {
    fail("InfeasibleTopology", e.what());
    return findings;
  }
  try {
    auto tables = build_routing(sc, schedule);
    for (const auto& [node, table] : tables) table.validate();
  } catch (const PathInvalidError& e) {
    fail("PathInvalid", e.what());
  } catch (const EntryConflictError& e) {
    fail("EntryConflict", e.what());
  } catch (const Error& e) {
    fail("RoutingInvalid", e.what());
  }
  try {
    build_workload(sc);
  } catch (const Error& e) {
    fail("WorkloadInvalid", e.what());
  }
  return findings;
}

}  // namespace optonet
