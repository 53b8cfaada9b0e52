#include "optonet/json_io.hpp"

#include "optonet/errors.hpp"

namespace optonet {

Json schedule_to_json(const OpticalSchedule& s) {
  Json j;
  j["node_count"] = s.node_count;
  j["slice_duration_ns"] = s.slice_duration_ns;
  j["guardband_ns"] = s.guardband_ns;
  j["static"] = s.static_topology;
  Json slices = Json::array();
  for (const auto& slice : s.slices) {
    Json arr = Json::array();
    for (const Circuit& c : slice)
      arr.push_back(Json::array({c.n1, c.port1, c.n2, c.port2}));
    slices.push_back(std::move(arr));
  }
  j["slices"] = std::move(slices);
  return j;
}

OpticalSchedule schedule_from_json(const Json& j) {
  try {
    OpticalSchedule s(j.at("node_count").get<std::size_t>(),
                      j.at("slices").size());
    s.slice_duration_ns = j.value("slice_duration_ns", s.slice_duration_ns);
    s.guardband_ns = j.value("guardband_ns", s.guardband_ns);
    s.static_topology = j.value("static", false);
    SliceId t = 0;
    for (const Json& slice : j.at("slices")) {
      for (const Json& c : slice) {
        if (!c.is_array() || c.size() != 4)
          throw SchemaError("circuit must be [n1, p1, n2, p2]");
        s.slices[t].emplace_back(
            c[0].get<NodeId>(), c[1].get<PortId>(), c[2].get<NodeId>(),
            c[3].get<PortId>(),
            s.static_topology ? std::optional<SliceId>{} : std::optional<SliceId>{t});
      }
      ++t;
    }
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("bad schedule json: ") + e.what());
  }
}

Json entry_to_json(const TimeFlowEntry& e) {
  Json j;
  j["arr_ts"] = e.arr_ts ? Json(*e.arr_ts) : Json(nullptr);
  j["src"] = e.src ? Json(*e.src) : Json(nullptr);
  j["dst"] = e.dst;
  if (const auto* nh = std::get_if<NextHopAction>(&e.action)) {
    Json a;
    a["type"] = "next_hop";
    a["port"] = nh->egress_port;
    a["dep_ts"] = nh->dep_ts ? Json(*nh->dep_ts) : Json(nullptr);
    j["action"] = std::move(a);
  } else {
    const auto& sr = std::get<SourceRouteAction>(e.action);
    Json a;
    a["type"] = "source_route";
    Json hops = Json::array();
    for (const SourceRouteHop& h : sr.hops)
      hops.push_back(Json::array(
          {h.egress_port, h.dep_ts ? Json(*h.dep_ts) : Json(nullptr)}));
    a["hops"] = std::move(hops);
    j["action"] = std::move(a);
  }
  j["group"] = e.multipath_group ? Json(*e.multipath_group) : Json(nullptr);
  j["mode"] = e.multipath_group
                  ? Json(e.multipath_mode == MultipathMode::PerPacket
                             ? "packet"
                             : "flow")
                  : Json(nullptr);
  j["weight"] = e.weight;
  return j;
}

TimeFlowEntry entry_from_json(const Json& j) {
  try {
    TimeFlowEntry e;
    if (!j.at("arr_ts").is_null()) e.arr_ts = j["arr_ts"].get<SliceId>();
    if (!j.at("src").is_null()) e.src = j["src"].get<NodeId>();
    e.dst = j.at("dst").get<NodeId>();
    const Json& a = j.at("action");
    std::string type = a.at("type").get<std::string>();
    if (type == "next_hop") {
      NextHopAction nh;
      nh.egress_port = a.at("port").get<PortId>();
      if (!a.at("dep_ts").is_null()) nh.dep_ts = a["dep_ts"].get<SliceId>();
      e.action = nh;
    } else if (type == "source_route") {
      SourceRouteAction sr;
      for (const Json& h : a.at("hops")) {
        SourceRouteHop hop;
        hop.egress_port = h.at(0).get<PortId>();
        if (!h.at(1).is_null()) hop.dep_ts = h.at(1).get<SliceId>();
        sr.hops.push_back(hop);
      }
      e.action = sr;
    } else {
      throw SchemaError("unknown action type: " + type);
    }
    if (!j.at("group").is_null()) {
      e.multipath_group = j["group"].get<int>();
      e.multipath_mode = j.value("mode", "flow") == std::string("packet")
                             ? MultipathMode::PerPacket
                             : MultipathMode::PerFlow;
    }
    e.weight = j.value("weight", 1.0);
    return e;
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("bad entry json: ") + ex.what());
  }
}

Json tables_to_json(const std::map<NodeId, TimeFlowTable>& tables) {
  Json out = Json::array();
  for (const auto& [node, table] : tables) {
    Json t;
    t["node"] = node;
    Json entries = Json::array();
    for (const TimeFlowEntry& e : table.entries) entries.push_back(entry_to_json(e));
    t["entries"] = std::move(entries);
    out.push_back(std::move(t));
  }
  return out;
}

std::map<NodeId, TimeFlowTable> tables_from_json(const Json& j) {
  std::map<NodeId, TimeFlowTable> out;
  for (const Json& t : j) {
    NodeId node = t.at("node").get<NodeId>();
    TimeFlowTable table;
    for (const Json& e : t.at("entries")) table.add(entry_from_json(e));
    out[node] = std::move(table);
  }
  return out;
}

Json path_to_json(const Path& p) {
  Json j;
  j["src"] = p.src;
  j["dst"] = p.dst;
  j["ts"] = p.ts ? Json(*p.ts) : Json(nullptr);
  Json hops = Json::array();
  for (const PathHop& h : p.hops)
    hops.push_back(
        Json::array({h.next_node, h.dep_ts ? Json(*h.dep_ts) : Json(nullptr)}));
  j["hops"] = std::move(hops);
  j["weight"] = p.weight;
  return j;
}

Path path_from_json(const Json& j) {
  try {
    Path p;
    p.src = j.at("src").get<NodeId>();
    p.dst = j.at("dst").get<NodeId>();
    if (j.contains("ts") && !j["ts"].is_null()) p.ts = j["ts"].get<SliceId>();
    for (const Json& h : j.at("hops")) {
      PathHop hop;
      hop.next_node = h.at(0).get<NodeId>();
      if (!h.at(1).is_null()) hop.dep_ts = h.at(1).get<SliceId>();
      p.hops.push_back(hop);
    }
    p.weight = j.value("weight", 1.0);
    return p;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("bad path json: ") + e.what());
  }
}

Json tm_to_json(const TrafficMatrix& tm) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < tm.size(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < tm.size(); ++k) row.push_back(tm.at(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

TrafficMatrix tm_from_json(const Json& j) {
  TrafficMatrix tm(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t k = 0; k < j[i].size(); ++k)
      tm.set(i, k, j[i][k].get<double>());
  return tm;
}

Json metrics_to_json(const Metrics& m) {
  Json j;
  j["bytes"] = {{"injected", m.injected_bytes},
                {"delivered", m.delivered_bytes},
                {"dropped", m.dropped_bytes}};
  j["packets"] = {{"injected", m.injected_packets},
                  {"delivered", m.delivered_packets},
                  {"dropped", m.dropped_packets}};
  j["drops_by_reason"] = m.drops_by_reason;
  j["loss_rate"] = m.loss_rate();
  std::uint64_t completed = 0;
  for (const FlowResult& f : m.flows)
    if (f.completed) completed++;
  j["fct_ns"] = {{"p50", m.fct_percentile_ns(0.50)},
                 {"p95", m.fct_percentile_ns(0.95)},
                 {"p99", m.fct_percentile_ns(0.99)},
                 {"p999", m.fct_percentile_ns(0.999)},
                 {"completed", completed},
                 {"incomplete", m.incomplete_flows.size()}};
  double seconds = static_cast<double>(m.end_time_ns) / 1e9;
  j["throughput_bps"] =
      seconds > 0 ? static_cast<double>(m.delivered_bytes) * 8.0 / seconds : 0.0;
  j["reorder_events"] = m.reorder_events;
  j["mean_queue_wait_ns"] = m.mean_queue_wait_ns();
  j["buffer_bytes"] = {{"p999", m.buffer_percentile_bytes(0.999)},
                       {"peak", m.peak_node_buffer_bytes()}};
  j["est_error_max_bytes"] = m.est_error_max_bytes;
  j["est_error_ingress_max_bytes"] = m.est_error_ingress_max_bytes;
  j["pushback_messages"] = m.pushback_messages;
  j["offloaded_packets"] = m.offloaded_packets;
  j["return_missed"] = m.return_missed;
  j["deferrals"] = m.deferrals;
  j["ta_iterations"] = m.ta_iterations;
  j["ta_aborted"] = m.ta_aborted;
  j["end_time_ns"] = m.end_time_ns;
  j["horizon_exceeded"] = m.horizon_exceeded;
  j["incomplete_flows"] = m.incomplete_flows;
  return j;
}

}  // namespace optonet
