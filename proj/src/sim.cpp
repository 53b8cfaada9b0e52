#include "optonet/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "optonet/errors.hpp"

namespace optonet {

void SimConfig::validate() const {
  if (node_count < 2) throw SchemaError("node_count must be >= 2");
  if (uplinks < 1) throw SchemaError("uplinks must be >= 1");
  if (hosts_per_node < 1) throw SchemaError("hosts_per_node must be >= 1");
  if (link_bandwidth_bps <= 0) throw SchemaError("bandwidth must be positive");
  if (guardband_ns < 0 || slice_duration_ns <= guardband_ns)
    throw SchemaError("need slice_duration_ns > guardband_ns >= 0");
  if (queues_per_port < 1) throw SchemaError("queues_per_port must be >= 1");
  if (update_interval_ns <= 0) throw SchemaError("update_interval_ns must be > 0");
  if (propagation_delay_ns < 0 || notify_lead_ns < 0 || sync_error_ns < 0 ||
      rotation_jitter_min_ns < 0 ||
      rotation_jitter_max_ns < rotation_jitter_min_ns)
    throw SchemaError("delays must be >= 0 and jitter range ordered");
  if (mtu_bytes < 64) throw SchemaError("mtu_bytes too small");
}

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double idx = p * (static_cast<double>(v.size()) - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - static_cast<double>(lo);
  return v[lo] * (1 - frac) + v[hi] * frac;
}

}  // namespace

double Metrics::fct_percentile_ns(double p) const {
  std::vector<double> v;
  for (const FlowResult& f : flows)
    if (f.completed) v.push_back(static_cast<double>(f.completion_ns - f.arrival_ns));
  return percentile(std::move(v), p);
}

double Metrics::buffer_percentile_bytes(double p) const {
  std::vector<double> v;
  for (const SliceSample& s : slices)
    for (std::uint64_t b : s.node_max_bytes) v.push_back(static_cast<double>(b));
  return percentile(std::move(v), p);
}

std::uint64_t Metrics::peak_node_buffer_bytes() const {
  std::uint64_t peak = 0;
  for (const SliceSample& s : slices)
    for (std::uint64_t b : s.node_max_bytes) peak = std::max(peak, b);
  return peak;
}

std::vector<TelemetrySample> telemetry(const Metrics& m, const SimConfig& cfg,
                                       NodeId node, PortId port,
                                       Nanos interval_ns) {
  std::vector<TelemetrySample> out;
  if (interval_ns <= 0 || m.slices.empty()) return out;
  for (const SliceSample& s : m.slices) {
    Nanos t = static_cast<Nanos>(s.slice_abs) * cfg.slice_duration_ns;
    std::size_t bucket = static_cast<std::size_t>(t / interval_ns);
    while (out.size() <= bucket)
      out.push_back({static_cast<Nanos>(out.size()) * interval_ns, 0, 0});
    std::size_t span = s.port_max_bytes.size() / cfg.node_count;
    std::size_t pidx = node * span + port;
    if (port < span && pidx < s.port_max_bytes.size()) {
      out[bucket].max_buffer_bytes =
          std::max(out[bucket].max_buffer_bytes, s.port_max_bytes[pidx]);
      out[bucket].delivered_bits += s.port_delivered_bits[pidx];
    }
  }
  return out;
}

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Rng {
  std::uint64_t state = 1;
  std::uint64_t next() {
    state += kGolden;
    return mix(state);
  }
  double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  Nanos range(Nanos lo, Nanos hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<Nanos>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

enum class Ev : std::uint8_t {
  FlowArrival,
  HostInject,
  Rotate,
  Tick,
  TryServe,
  PortFree,
  Deliver,
  OffloadReturn,
  PushbackRelay,
  SignalRelease,
  CtrlWindowClose,
  CtrlCollect,
  TopoSwap,
  RetireEpoch,
  StaticSample,
};

struct Event {
  Nanos t = 0;
  std::uint64_t seq = 0;
  Ev kind = Ev::Tick;
  std::uint64_t a = 0, b = 0, c = 0;
};

struct EventAfter {
  bool operator()(const Event& x, const Event& y) const {
    return std::tie(x.t, x.seq) > std::tie(y.t, y.seq);
  }
};

struct Packet {
  std::uint32_t id = 0;
  std::uint64_t flow_id = 0;
  std::uint32_t flow_idx = 0;
  std::uint32_t seq = 0;
  std::int64_t size = 0;
  HostId src_host = 0, dst_host = 0;
  NodeId src_node = 0, dst_node = 0;
  Nanos ingress_ns = 0;
  std::uint64_t nonce = 0;
  std::vector<SourceRouteHop> route;
  std::uint32_t route_next = 0;
  std::vector<std::pair<NodeId, SliceId>> visits;
  NodeId prev_node = 0;
  Nanos enq_ns = 0;
  std::uint64_t enq_slice_abs = 0;
  std::uint64_t dep_slice_abs = 0;
  std::uint32_t rank = 0;
  PortId pend_port = 0;           // egress decided before an offload round trip
  std::optional<SliceId> pend_dep;
};

struct CalQueue {
  std::deque<std::uint32_t> fifo;
  std::int64_t true_occ = 0;
  std::int64_t est_occ = 0;
  bool paused = true;
};

struct Port {
  std::vector<CalQueue> q;
  bool busy = false;
  std::size_t inflight_q = 0;  // queue the packet on the wire came from
  std::uint64_t slice_max_bytes = 0;
  std::uint64_t slice_bits = 0;
  std::int64_t total_true() const {
    std::int64_t s = 0;
    for (const CalQueue& cq : q) s += cq.true_occ;
    return s;
  }
};

struct FlowRt {
  FlowSpec spec;
  NodeId src_node = 0, dst_node = 0;
  std::uint64_t injected = 0;    // bytes handed to the switch
  std::uint64_t delivered = 0;   // bytes landed at the destination node
  std::uint32_t next_seq = 0;
  std::int64_t max_seq_seen = -1;
  std::uint32_t reorders = 0;
  Nanos completion = 0;
  bool completed = false;
  bool parked = false;
};

struct Host {
  NodeId node = 0;
  std::vector<std::uint32_t> active;
  std::size_t rr = 0;
  Nanos busy_until = 0;
  bool inject_scheduled = false;
};

struct NodeState {
  std::vector<Port> ports;
  TimeFlowTable table;
  Nanos clock_offset = 0;
  std::uint64_t cur_slice_abs = 0;
  Nanos slice_start_perc = 0;
  std::uint64_t slice_node_max = 0;
  Rng jitter;
  std::map<std::uint64_t, std::vector<std::uint32_t>> staging;  // dep slice -> pkts
  std::int64_t staging_bytes = 0;
  std::map<std::uint64_t, std::int64_t> return_bytes;  // dep slice -> scheduled
  std::map<std::pair<NodeId, SliceId>, Nanos> suppress_until;
  std::map<std::pair<NodeId, SliceId>, std::uint64_t> pushback_mark;
  std::map<NodeId, std::vector<std::uint32_t>> paused_flows;  // dst -> flows
  std::map<NodeId, Nanos> release_until;                      // dst -> window end
  std::set<NodeId> release_pending;

  std::int64_t buffer_bytes() const {
    std::int64_t s = staging_bytes;
    for (const Port& p : ports) s += p.total_true();
    return s;
  }
  // Pause/unpause happens on all ports at the same instant.
  void ports_rotate(std::size_t pause_idx, std::size_t active_idx) {
    for (Port& p : ports) {
      p.q[pause_idx].paused = true;
      p.q[active_idx].paused = false;
    }
  }
};

}  // namespace

struct Simulator::Impl {
  SimConfig cfg;
  OpticalSchedule schedule;
  FabricTable fabric;
  bool have_topology = false;
  bool is_static = false;
  std::size_t ports_per_node = 1;

  std::vector<NodeState> nodes;
  std::vector<Host> hosts;
  std::vector<FlowRt> flows;
  std::vector<Packet> packets;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events;
  std::uint64_t event_seq = 0;
  Nanos now = 0;

  Nanos ta_interval = 0;
  TaCallback ta_cb;
  int epoch = 0;
  TrafficMatrix tm_window;
  TrafficMatrix tm_pending;
  std::optional<std::pair<OpticalSchedule, FabricTable>> pending_swap;

  CongestionHook hook;
  std::ostream* trace = nullptr;

  Rng workload_rng;
  Rng offload_rng;

  Metrics metrics;
  std::uint64_t outstanding = 0;     // formed packets not yet resolved
  std::uint64_t flows_open = 0;      // flows not fully injected
  std::uint64_t flows_unfinished = 0;
  std::uint64_t last_sampled_slice = 0;

  explicit Impl(SimConfig c) : cfg(std::move(c)) {
    cfg.validate();
    tm_window = TrafficMatrix(cfg.node_count);
    workload_rng.state = cfg.seed ^ 0x77f0c0de;
    offload_rng.state = cfg.seed ^ 0x0ff10ad;
  }

  // --- plumbing --------------------------------------------------------

  Nanos delta() const { return cfg.slice_duration_ns; }
  std::size_t cycle() const { return is_static ? 1 : schedule.cycle_length(); }
  std::int64_t bps() const { return cfg.link_bandwidth_bps; }
  Nanos ser_time(std::int64_t bytes) const {
    return (bytes * 8 * 1'000'000'000LL) / bps();
  }
  std::int64_t bytes_in(Nanos ns) const { return bps() * ns / 8 / 1'000'000'000LL; }

  void push(Nanos t, Ev kind, std::uint64_t a = 0, std::uint64_t b = 0,
            std::uint64_t c = 0) {
    events.push({std::max(t, now), event_seq++, kind, a, b, c});
  }

  void trace_line(const std::string& kind, std::int64_t node = -1,
                  std::int64_t port = -1, std::int64_t queue = -1,
                  std::int64_t packet = -1) {
    if (!trace) return;
    (*trace) << now << ' ' << kind << ' ' << node << ' ' << port << ' '
             << queue << ' ' << packet << '\n';
  }

  NodeId node_of_host(HostId h) const {
    return static_cast<NodeId>(h / cfg.hosts_per_node);
  }

  SliceId perceived_slice(const NodeState& nd) const {
    return static_cast<SliceId>(nd.cur_slice_abs % cycle());
  }

  // --- gauges ----------------------------------------------------------

  void touch_port(NodeState& nd, std::size_t port) {
    Port& p = nd.ports[port];
    std::uint64_t t = static_cast<std::uint64_t>(p.total_true());
    p.slice_max_bytes = std::max(p.slice_max_bytes, t);
    std::uint64_t nb = static_cast<std::uint64_t>(nd.buffer_bytes());
    nd.slice_node_max = std::max(nd.slice_node_max, nb);
  }

  double queue_gap(const NodeState& nd, std::size_t port, std::size_t qidx) {
    const CalQueue& q = nd.ports[port].q[qidx];
    return std::abs(static_cast<double>(q.est_occ - q.true_occ));
  }
  void sample_egress_error(NodeState& nd, std::size_t port, std::size_t qidx) {
    metrics.est_error_max_bytes =
        std::max(metrics.est_error_max_bytes, queue_gap(nd, port, qidx));
  }
  void sample_ingress_error(NodeState& nd, std::size_t port, std::size_t qidx) {
    metrics.est_error_ingress_max_bytes =
        std::max(metrics.est_error_ingress_max_bytes, queue_gap(nd, port, qidx));
  }

  SliceSample& sample_row(std::uint64_t slice_abs) {
    while (metrics.slices.size() <= slice_abs) {
      SliceSample s;
      s.slice_abs = metrics.slices.size();
      s.node_max_bytes.assign(cfg.node_count, 0);
      s.port_max_bytes.assign(cfg.node_count * ports_per_node, 0);
      s.port_delivered_bits.assign(cfg.node_count * ports_per_node, 0);
      metrics.slices.push_back(std::move(s));
    }
    return metrics.slices[slice_abs];
  }

  void close_slice_gauges(NodeId n, std::uint64_t slice_abs) {
    NodeState& nd = nodes[n];
    SliceSample& row = sample_row(slice_abs);
    if (row.port_max_bytes.size() < cfg.node_count * ports_per_node) {
      row.port_max_bytes.resize(cfg.node_count * ports_per_node, 0);
      row.port_delivered_bits.resize(cfg.node_count * ports_per_node, 0);
    }
    row.node_max_bytes[n] = std::max(row.node_max_bytes[n], nd.slice_node_max);
    for (std::size_t p = 0; p < nd.ports.size(); ++p) {
      row.port_max_bytes[n * ports_per_node + p] = nd.ports[p].slice_max_bytes;
      row.port_delivered_bits[n * ports_per_node + p] = nd.ports[p].slice_bits;
      nd.ports[p].slice_max_bytes =
          static_cast<std::uint64_t>(nd.ports[p].total_true());
      nd.ports[p].slice_bits = 0;
    }
    nd.slice_node_max = static_cast<std::uint64_t>(nd.buffer_bytes());
  }

  // --- setup -----------------------------------------------------------

  void preload(const OpticalSchedule& sched,
               const std::map<NodeId, TimeFlowTable>& tables) {
    OpticalSchedule s = sched;
    s.slice_duration_ns = cfg.slice_duration_ns;
    s.guardband_ns = cfg.guardband_ns;
    s.validate();
    if (s.node_count != cfg.node_count)
      throw SchemaError("schedule node_count does not match the sim config");
    fabric = deploy_topo(s);
    schedule = std::move(s);
    is_static = schedule.static_topology;
    have_topology = true;
    ports_per_node = std::max(cfg.uplinks, fabric.port_span());

    nodes.assign(cfg.node_count, NodeState{});
    Rng sync_rng{cfg.seed ^ 0x5ca1ab1e};
    for (NodeId n = 0; n < cfg.node_count; ++n) {
      NodeState& nd = nodes[n];
      nd.ports.resize(ports_per_node);
      for (Port& p : nd.ports) {
        p.q.resize(cfg.queues_per_port);
        p.q[0].paused = false;  // slice 0 starts with queue 0 active
      }
      nd.jitter.state = cfg.seed ^ mix(0xabcd0000 + n);
      nd.clock_offset =
          cfg.sync_error_ns == 0
              ? 0
              : sync_rng.range(-cfg.sync_error_ns, cfg.sync_error_ns);
      auto it = tables.find(n);
      if (it != tables.end()) {
        TimeFlowTable t = it->second;
        t.validate();
        for (TimeFlowEntry& e : t.entries) e.epoch = 0;
        nd.table = std::move(t);
      }
    }
    hosts.assign(cfg.node_count * cfg.hosts_per_node, Host{});
    for (HostId h = 0; h < hosts.size(); ++h) hosts[h].node = node_of_host(h);
    trace_line("deploy_routing", -1, -1, -1, 0);
    trace_line("deploy_topo", -1, -1, -1, 0);
  }

  void set_workload(std::vector<FlowSpec> specs) {
    std::sort(specs.begin(), specs.end(), [](const FlowSpec& a, const FlowSpec& b) {
      return std::tie(a.arrival_time_ns, a.flow_id) <
             std::tie(b.arrival_time_ns, b.flow_id);
    });
    flows.clear();
    for (const FlowSpec& s : specs) {
      FlowRt f;
      f.spec = s;
      f.src_node = node_of_host(s.src_host);
      f.dst_node = node_of_host(s.dst_host);
      flows.push_back(f);
    }
    flows_open = flows.size();
    flows_unfinished = flows.size();
  }

  // --- hosts -----------------------------------------------------------

  bool in_release_window(const NodeState& nd, NodeId dst) const {
    auto it = nd.release_until.find(dst);
    // Stop short of the window edge: the final packet still needs wire time
    // through the switch before the circuit goes away.
    return it != nd.release_until.end() &&
           now + 3 * ser_time(cfg.mtu_bytes) <= it->second;
  }

  // Next absolute slice >= from with a direct circuit node->dst, if any
  // occurs within one cycle.
  std::optional<std::uint64_t> next_direct_slice(NodeId node, NodeId dst,
                                                 std::uint64_t from) const {
    for (std::uint64_t d = 0; d < cycle(); ++d) {
      std::uint64_t s = from + d;
      SliceId sid = static_cast<SliceId>(s % cycle());
      if (fabric.port_toward(sid, node, dst)) return s;
    }
    return std::nullopt;
  }

  void park_flow(std::uint32_t fidx) {
    FlowRt& f = flows[fidx];
    NodeState& nd = nodes[f.src_node];
    f.parked = true;
    nd.paused_flows[f.dst_node].push_back(fidx);
    if (nd.release_pending.count(f.dst_node)) return;
    auto next = next_direct_slice(f.src_node, f.dst_node, nd.cur_slice_abs + 1);
    if (!next) {  // never directly connected; releasing now avoids livelock
      release_flows(f.src_node, f.dst_node);
      return;
    }
    nd.release_pending.insert(f.dst_node);
    Nanos t = static_cast<Nanos>(*next) * delta() + cfg.guardband_ns;
    push(std::max(now, t - cfg.notify_lead_ns), Ev::SignalRelease, f.src_node,
         f.dst_node, *next);
  }

  void release_flows(NodeId node, NodeId dst) {
    NodeState& nd = nodes[node];
    auto it = nd.paused_flows.find(dst);
    if (it == nd.paused_flows.end()) return;
    for (std::uint32_t fidx : it->second) {
      FlowRt& f = flows[fidx];
      if (!f.parked) continue;
      f.parked = false;
      Host& h = hosts[f.spec.src_host];
      h.active.push_back(fidx);
      kick_host(f.spec.src_host);
    }
    nd.paused_flows.erase(it);
  }

  void on_signal_release(NodeId node, NodeId dst, std::uint64_t slice_abs) {
    NodeState& nd = nodes[node];
    nd.release_pending.erase(dst);
    Nanos start = static_cast<Nanos>(slice_abs) * delta() + cfg.guardband_ns;
    Nanos end = static_cast<Nanos>(slice_abs + 1) * delta();
    if (now < start) {
      push(start, Ev::SignalRelease, node, dst, slice_abs);
      nd.release_pending.insert(dst);
      return;
    }
    nd.release_until[dst] = end;
    release_flows(node, dst);
  }

  void kick_host(HostId h) {
    Host& host = hosts[h];
    if (host.inject_scheduled) return;
    if (host.active.empty()) return;
    host.inject_scheduled = true;
    push(std::max(now, host.busy_until), Ev::HostInject, h);
  }

  // Departure slice the source switch would pick for this destination now;
  // used by the push-back gate before a packet is even formed.
  std::optional<SliceId> dry_dep_slice(NodeId node, NodeId dst,
                                       std::uint64_t nonce) {
    const NodeState& nd = nodes[node];
    HashInputs hi;
    hi.ingress_ts_ns = now;
    hi.packet_nonce = nonce;
    hi.seed = cfg.seed;
    hi.five_tuple = {0, 0, 0, 0, 6};
    const TimeFlowEntry* e =
        match_entry(nd.table, perceived_slice(nd), node, dst, hi);
    if (!e) return std::nullopt;
    if (const auto* nh = std::get_if<NextHopAction>(&e->action))
      return nh->dep_ts;
    const auto& sr = std::get<SourceRouteAction>(e->action);
    return sr.hops.empty() ? std::nullopt : sr.hops.front().dep_ts;
  }

  bool pushback_blocked(NodeId node, NodeId dst, std::uint64_t nonce) {
    NodeState& nd = nodes[node];
    if (nd.suppress_until.empty()) return false;
    auto dep = dry_dep_slice(node, dst, nonce);
    if (!dep) return false;
    auto it = nd.suppress_until.find({dst, *dep});
    return it != nd.suppress_until.end() && now < it->second;
  }

  void on_host_inject(HostId h) {
    Host& host = hosts[h];
    host.inject_scheduled = false;
    if (now < host.busy_until) {
      kick_host(h);
      return;
    }
    NodeState& nd = nodes[host.node];
    for (std::size_t tries = 0; tries < host.active.size();) {
      if (host.active.empty()) return;
      host.rr %= host.active.size();
      std::uint32_t fidx = host.active[host.rr];
      FlowRt& f = flows[fidx];
      if (f.injected >= f.spec.size_bytes) {
        host.active.erase(host.active.begin() + static_cast<long>(host.rr));
        continue;
      }
      // Flow pausing gates elephants outside their circuit windows.
      if (cfg.services.flow_pausing &&
          static_cast<std::int64_t>(f.injected) >= cfg.elephant_threshold_bytes &&
          !in_release_window(nd, f.dst_node)) {
        host.active.erase(host.active.begin() + static_cast<long>(host.rr));
        park_flow(fidx);
        continue;
      }
      std::uint64_t nonce = mix(f.spec.flow_id * 1000003ULL + f.next_seq);
      if (pushback_blocked(host.node, f.dst_node, nonce)) {
        host.rr++;
        tries++;
        continue;  // stays active; retried at the next slice boundary
      }
      // Form and inject one packet.
      std::int64_t size = std::min<std::int64_t>(
          cfg.mtu_bytes,
          static_cast<std::int64_t>(f.spec.size_bytes - f.injected));
      Packet p;
      p.id = static_cast<std::uint32_t>(packets.size());
      p.flow_id = f.spec.flow_id;
      p.flow_idx = fidx;
      p.seq = f.next_seq++;
      p.size = size;
      p.src_host = f.spec.src_host;
      p.dst_host = f.spec.dst_host;
      p.src_node = f.src_node;
      p.dst_node = f.dst_node;
      p.ingress_ns = now;
      p.nonce = nonce;
      p.prev_node = f.src_node;
      packets.push_back(p);
      f.injected += static_cast<std::uint64_t>(size);
      if (f.injected >= f.spec.size_bytes) flows_open--;
      metrics.injected_packets++;
      metrics.injected_bytes += static_cast<std::uint64_t>(size);
      tm_window.add(f.src_node, f.dst_node, static_cast<double>(size));
      outstanding++;
      host.busy_until = now + ser_time(size);
      host.rr++;
      handle_at_node(p.id, host.node);
      kick_host(h);
      return;
    }
  }

  // --- packet path -----------------------------------------------------

  void drop(std::uint32_t pid, const std::string& reason) {
    Packet& p = packets[pid];
    metrics.dropped_packets++;
    metrics.dropped_bytes += static_cast<std::uint64_t>(p.size);
    metrics.drops_by_reason[reason]++;
    trace_line("drop_" + reason, p.prev_node, -1, -1, pid);
    outstanding--;
  }

  void deliver_final(std::uint32_t pid, NodeId node) {
    Packet& p = packets[pid];
    FlowRt& f = flows[p.flow_idx];
    metrics.delivered_packets++;
    metrics.delivered_bytes += static_cast<std::uint64_t>(p.size);
    if (!is_static)
      sample_row(static_cast<std::uint64_t>(now / delta())).delivered_bytes +=
          static_cast<std::uint64_t>(p.size);
    if (static_cast<std::int64_t>(p.seq) < f.max_seq_seen) {
      f.reorders++;
      metrics.reorder_events++;
    }
    f.max_seq_seen = std::max(f.max_seq_seen, static_cast<std::int64_t>(p.seq));
    f.delivered += static_cast<std::uint64_t>(p.size);
    if (f.delivered >= f.spec.size_bytes && !f.completed) {
      f.completed = true;
      f.completion = now;
      flows_unfinished--;
    }
    trace_line("deliver", node, -1, -1, pid);
    outstanding--;
  }

  void handle_at_node(std::uint32_t pid, NodeId node) {
    Packet& p = packets[pid];
    NodeState& nd = nodes[node];
    p.visits.push_back({node, perceived_slice(nd)});
    if (node == p.dst_node) {
      deliver_final(pid, node);
      return;
    }

    PortId port = 0;
    std::optional<SliceId> dep;
    bool from_stack = false;
    if (p.route_next < p.route.size()) {
      port = p.route[p.route_next].egress_port;
      dep = p.route[p.route_next].dep_ts;
      p.route_next++;
      from_stack = true;
    } else {
      HashInputs hi;
      hi.ingress_ts_ns = now;
      hi.packet_nonce = p.nonce;
      hi.seed = cfg.seed;
      hi.five_tuple = {p.src_host, p.dst_host,
                       static_cast<std::uint16_t>(p.flow_id & 0xffff),
                       static_cast<std::uint16_t>((p.flow_id >> 16) & 0xffff),
                       6};
      const TimeFlowEntry* e =
          match_entry(nd.table, perceived_slice(nd), p.src_node, p.dst_node, hi);
      if (!e) {
        drop(pid, "no_match");
        return;
      }
      if (const auto* nh = std::get_if<NextHopAction>(&e->action)) {
        port = nh->egress_port;
        dep = nh->dep_ts;
      } else {
        const auto& sr = std::get<SourceRouteAction>(e->action);
        if (sr.hops.empty()) {
          drop(pid, "no_match");
          return;
        }
        p.route = sr.hops;
        p.route_next = 1;
        port = sr.hops[0].egress_port;
        dep = sr.hops[0].dep_ts;
        // The stack was assigned right here, so the source may still defer
        // to the next slice's entry and write a fresh stack.
        from_stack = false;
      }
    }
    admit(pid, node, port, dep, from_stack, 0);
  }

  struct AdmitOutcome {
    bool accepted = false;
    std::optional<RejectReason> reason;
  };

  AdmitOutcome try_enqueue(std::uint32_t pid, NodeId node, PortId port,
                           std::optional<SliceId> dep, std::uint32_t min_rank) {
    Packet& p = packets[pid];
    NodeState& nd = nodes[node];
    if (port >= nd.ports.size()) {
      // Routing was compiled against a wider fabric than this sim models.
      drop(pid, "no_match");
      return {true, std::nullopt};  // resolved, nothing more to do
    }
    // Shared packet memory is a hard physical limit, not a congestion
    // policy: beyond it the packet is simply lost at ingress.
    if (nd.buffer_bytes() + p.size > cfg.switch_buffer_bytes) {
      drop(pid, "buffer_overflow");
      return {true, std::nullopt};
    }
    const std::size_t K = cfg.queues_per_port;
    std::uint32_t rank = 0;
    if (!is_static && dep) {
      std::uint32_t perc = perceived_slice(nd);
      rank = (*dep + static_cast<std::uint32_t>(cycle()) - perc) %
             static_cast<std::uint32_t>(cycle());
      // A deferred packet pretends it arrived min_rank slices later, so it
      // waits for the dep slice's first occurrence from that point on.
      while (rank < min_rank) rank += static_cast<std::uint32_t>(cycle());
    }
    if (!is_static && rank >= K)
      return {false, RejectReason::BeyondHorizon};
    std::size_t qidx = is_static ? 0 : (nd.cur_slice_abs + rank) % K;
    CalQueue& q = nd.ports[port].q[qidx];
    if (cfg.services.congestion_detection) {
      if (is_static) {
        if (q.est_occ + p.size > cfg.congestion_threshold_bytes)
          return {false, RejectReason::Threshold};
      } else {
        Nanos elapsed =
            std::clamp<Nanos>(now - nd.slice_start_perc, 0, delta());
        std::int64_t adm =
            rank == 0 ? bytes_in(delta() - cfg.guardband_ns - elapsed)
                      : bytes_in(delta() - cfg.guardband_ns);
        if (q.est_occ + p.size > adm)
          return {false, RejectReason::CongestionFull};
        if (q.est_occ + p.size > cfg.congestion_threshold_bytes)
          return {false, RejectReason::Threshold};
      }
    }
    sample_ingress_error(nd, port, qidx);
    q.fifo.push_back(pid);
    q.true_occ += p.size;
    q.est_occ += p.size;
    p.enq_ns = now;
    p.enq_slice_abs = nd.cur_slice_abs;
    p.dep_slice_abs = nd.cur_slice_abs + rank;
    p.rank = rank;
    touch_port(nd, port);
    trace_line("enqueue", node, static_cast<std::int64_t>(port),
               static_cast<std::int64_t>(qidx), pid);
    if (!q.paused) try_serve(node, port);
    return {true, std::nullopt};
  }

  void emit_pushback(NodeId at, std::uint32_t pid, SliceId slice) {
    Packet& p = packets[pid];
    NodeId sender = p.prev_node;
    NodeState& nd = nodes[at];
    auto key = std::pair{p.dst_node, slice};
    auto it = nd.pushback_mark.find(key);
    if (it != nd.pushback_mark.end() && it->second == nd.cur_slice_abs) return;
    nd.pushback_mark[key] = nd.cur_slice_abs;
    metrics.pushback_messages++;
    trace_line("pushback", at, -1, static_cast<std::int64_t>(slice), pid);
    push(now + cfg.propagation_delay_ns, Ev::PushbackRelay, sender, p.dst_node,
         slice);
  }

  void admit(std::uint32_t pid, NodeId node, PortId port,
             std::optional<SliceId> dep, bool from_stack, int attempt) {
    Packet& p = packets[pid];
    NodeState& nd = nodes[node];
    while (true) {
      auto out = try_enqueue(pid, node, port, dep,
                             static_cast<std::uint32_t>(attempt));
      if (out.accepted) return;
      RejectReason why = *out.reason;
      if (why == RejectReason::BeyondHorizon && cfg.services.offloading &&
          !is_static) {
        offload(pid, node, port, dep);
        return;
      }
      if (why == RejectReason::CongestionFull && cfg.services.pushback && dep)
        emit_pushback(node, pid, *dep);
      CongestionReaction re =
          hook ? hook(node, p.dst_node, dep.value_or(0), why) : cfg.reaction;
      if (re == CongestionReaction::Drop || is_static) {
        drop(pid, why == RejectReason::BeyondHorizon ? "beyond_horizon"
                  : why == RejectReason::Threshold   ? "threshold_drop"
                                                     : "congestion_drop");
        return;
      }
      // Defer: retry the plan entry of the next arrival slice, up to one
      // full cycle before giving up.
      attempt++;
      metrics.deferrals++;
      if (attempt > static_cast<int>(cycle())) {
        drop(pid, "defer_exhausted");
        return;
      }
      if (from_stack) {
        // Mid-path packets keep their remaining hop stack; min_rank pushes
        // the same departure to a later occurrence of its slice.
        continue;
      }
      SliceId arr_eff = static_cast<SliceId>(
          (perceived_slice(nd) + attempt) % cycle());
      HashInputs hi;
      hi.ingress_ts_ns = now;
      hi.packet_nonce = p.nonce + static_cast<std::uint64_t>(attempt) * 7919;
      hi.seed = cfg.seed;
      hi.five_tuple = {p.src_host, p.dst_host,
                       static_cast<std::uint16_t>(p.flow_id & 0xffff),
                       static_cast<std::uint16_t>((p.flow_id >> 16) & 0xffff),
                       6};
      const TimeFlowEntry* e =
          match_entry(nd.table, arr_eff, p.src_node, p.dst_node, hi);
      if (!e) continue;  // no plan for that slice; try the one after
      if (const auto* nh = std::get_if<NextHopAction>(&e->action)) {
        port = nh->egress_port;
        dep = nh->dep_ts;
        p.route.clear();
        p.route_next = 0;
      } else {
        const auto& sr = std::get<SourceRouteAction>(e->action);
        if (sr.hops.empty()) continue;
        p.route = sr.hops;
        p.route_next = 1;
        port = sr.hops[0].egress_port;
        dep = sr.hops[0].dep_ts;
      }
    }
  }

  void offload(std::uint32_t pid, NodeId node, PortId port,
               std::optional<SliceId> dep) {
    Packet& p = packets[pid];
    NodeState& nd = nodes[node];
    p.pend_port = port;
    p.pend_dep = dep;
    std::uint32_t perc = perceived_slice(nd);
    std::uint32_t rank = dep ? (*dep + static_cast<std::uint32_t>(cycle()) - perc) %
                                   static_cast<std::uint32_t>(cycle())
                             : 0;
    std::uint64_t dep_abs = nd.cur_slice_abs + rank;
    HostId host = static_cast<HostId>(node * cfg.hosts_per_node +
                                      offload_rng.below(cfg.hosts_per_node));
    metrics.offloaded_packets++;
    trace_line("offload", node, static_cast<std::int64_t>(port), -1, pid);
    // Hosts initiate the return and pace it at line rate so each packet lands
    // just in time for its slice; the switch never holds more than the lead
    // window's worth of early arrivals.
    Nanos ret = 0;
    while (true) {
      std::int64_t ahead = nd.return_bytes[dep_abs];
      ret = static_cast<Nanos>(dep_abs) * delta() - cfg.notify_lead_ns +
            ser_time(ahead);
      Nanos slice_end = static_cast<Nanos>(dep_abs + 1) * delta();
      if (ret > now && ret + ser_time(p.size) <= slice_end) {
        nd.return_bytes[dep_abs] = ahead + p.size;
        break;
      }
      metrics.return_missed++;
      dep_abs += cycle();
    }
    p.dep_slice_abs = dep_abs;
    push(ret, Ev::OffloadReturn, pid, node, host);
  }

  void on_offload_return(std::uint32_t pid, NodeId node) {
    Packet& p = packets[pid];
    NodeState& nd = nodes[node];
    trace_line("offload_return", node, -1, -1, pid);
    if (p.dep_slice_abs <= nd.cur_slice_abs) {
      // Its slice is already running: re-enter the queues right away.
      admit(pid, node, p.pend_port, perceived_slice(nd), false, 0);
      return;
    }
    // Marginally early: buffer on the switch until the slice starts.
    nd.staging[p.dep_slice_abs].push_back(pid);
    nd.staging_bytes += p.size;
    if (!nd.ports.empty()) touch_port(nd, 0);
  }

  void release_staging(NodeId node) {
    NodeState& nd = nodes[node];
    auto it = nd.staging.find(nd.cur_slice_abs);
    if (it == nd.staging.end()) return;
    std::vector<std::uint32_t> pids = std::move(it->second);
    nd.staging.erase(it);
    for (std::uint32_t pid : pids) {
      Packet& p = packets[pid];
      nd.staging_bytes -= p.size;
      admit(pid, node, p.pend_port, perceived_slice(nd), false, 0);
    }
    // Drop stale return bookkeeping for slices that already started.
    while (!nd.return_bytes.empty() &&
           nd.return_bytes.begin()->first <= nd.cur_slice_abs)
      nd.return_bytes.erase(nd.return_bytes.begin());
  }

  // --- service ---------------------------------------------------------

  void try_serve(NodeId node, PortId port) {
    NodeState& nd = nodes[node];
    Port& pt = nd.ports[port];
    if (pt.busy) return;
    if (!is_static) {
      Nanos gate = nd.slice_start_perc + cfg.guardband_ns;
      if (now < gate) {
        push(gate, Ev::TryServe, node, port);
        return;
      }
    }
    std::size_t qidx = is_static ? 0 : nd.cur_slice_abs % cfg.queues_per_port;
    CalQueue& q = pt.q[qidx];
    if (q.paused || q.fifo.empty()) return;
    std::uint32_t pid = q.fifo.front();
    q.fifo.pop_front();
    Packet& p = packets[pid];
    metrics.queue_wait_total_ns += static_cast<std::uint64_t>(now - p.enq_ns);
    metrics.queue_wait_samples++;
    pt.busy = true;
    pt.inflight_q = qidx;  // still resident until the last bit is on the wire
    trace_line("dequeue", node, static_cast<std::int64_t>(port),
               static_cast<std::int64_t>(qidx), pid);
    push(now + ser_time(p.size), Ev::PortFree, node, port, pid);
  }

  void on_port_free(NodeId node, PortId port, std::uint32_t pid) {
    NodeState& nd = nodes[node];
    Port& pt = nd.ports[port];
    pt.busy = false;
    Packet& p = packets[pid];
    pt.q[pt.inflight_q].true_occ -= p.size;
    sample_egress_error(nd, port, pt.inflight_q);
    Nanos start = now - ser_time(p.size);
    bool live = false;
    std::optional<std::pair<NodeId, PortId>> peer;
    if (is_static) {
      peer = fabric.peer(0, node, port);
      live = peer.has_value();
    } else {
      // The circuit of the slice carrying the first bit must hold for the
      // whole serialization window. Senders self-gate at slice start + g, and
      // the reconfiguration dead time sits inside the next slice's withheld
      // head, so a tail over-run of at most one guardband still lands on the
      // old circuit; anything longer is cut mid-flight.
      std::uint64_t slice_abs = static_cast<std::uint64_t>(start / delta());
      SliceId sid = static_cast<SliceId>(slice_abs % cycle());
      peer = fabric.peer(sid, node, port);
      Nanos slice_begin = static_cast<Nanos>(slice_abs) * delta();
      live = peer.has_value() &&
             now <= slice_begin + delta() + cfg.guardband_ns;
    }
    if (!live) {
      p.prev_node = node;
      drop(pid, "no_circuit");
    } else {
      pt.slice_bits += static_cast<std::uint64_t>(p.size) * 8;
      p.prev_node = node;
      push(now + cfg.propagation_delay_ns, Ev::Deliver, pid, peer->first);
    }
    touch_port(nd, port);
    try_serve(node, port);
  }

  // --- rotation & ticks ------------------------------------------------

  void on_rotate(NodeId node, std::uint64_t new_abs) {
    NodeState& nd = nodes[node];
    close_slice_gauges(node, nd.cur_slice_abs);
    nd.cur_slice_abs = new_abs;
    nd.slice_start_perc = now;
    const std::size_t K = cfg.queues_per_port;
    std::size_t paused = (new_abs + K - 1) % K;
    std::size_t active = new_abs % K;
    nd.ports_rotate(paused, active);
    trace_line("rotate", node, -1, static_cast<std::int64_t>(active), -1);
    for (auto it = nd.suppress_until.begin(); it != nd.suppress_until.end();) {
      if (it->second <= now)
        it = nd.suppress_until.erase(it);
      else
        ++it;
    }
    release_staging(node);
    for (PortId p = 0; p < nd.ports.size(); ++p) try_serve(node, p);
    for (std::size_t h = node * cfg.hosts_per_node;
         h < (node + 1) * cfg.hosts_per_node; ++h)
      kick_host(static_cast<HostId>(h));
    // Next boundary, perturbed by this switch's rotation jitter.
    Nanos t = static_cast<Nanos>(new_abs + 1) * delta() + nd.clock_offset +
              nd.jitter.range(cfg.rotation_jitter_min_ns,
                              cfg.rotation_jitter_max_ns);
    push(t, Ev::Rotate, node, new_abs + 1);
  }

  void on_tick() {
    const std::int64_t quantum = bytes_in(cfg.update_interval_ns);
    for (NodeId n = 0; n < nodes.size(); ++n) {
      NodeState& nd = nodes[n];
      if (!is_static && now - nd.slice_start_perc < cfg.guardband_ns)
        continue;  // nothing can dequeue during the guardband
      std::size_t qidx = is_static ? 0 : nd.cur_slice_abs % cfg.queues_per_port;
      for (std::size_t p = 0; p < nd.ports.size(); ++p) {
        CalQueue& q = nd.ports[p].q[qidx];
        q.est_occ = std::max<std::int64_t>(0, q.est_occ - quantum);
      }
    }
    if (flows_open > 0 || outstanding > 0)
      push(now + cfg.update_interval_ns, Ev::Tick);
  }

  // --- controller ------------------------------------------------------

  void on_window_close() {
    tm_pending = tm_window;
    tm_window = TrafficMatrix(cfg.node_count);
    push(now + cfg.propagation_delay_ns, Ev::CtrlCollect);
    if (flows_open > 0 || outstanding > 0)
      push(now + ta_interval, Ev::CtrlWindowClose);
  }

  void on_collect() {
    if (!ta_cb) return;
    metrics.ta_iterations++;
    try {
      DeployPlan plan = ta_cb(tm_pending, schedule);
      int new_epoch = ++epoch;
      for (auto& [n, t] : plan.tables) {
        if (n >= nodes.size()) continue;
        std::vector<TimeFlowEntry> batch = t.entries;
        for (TimeFlowEntry& e : batch) e.epoch = new_epoch;
        nodes[n].table.add_front(std::move(batch));
      }
      trace_line("deploy_routing", -1, -1, -1, new_epoch);
      Nanos swap_at = now;
      if (plan.schedule) {
        OpticalSchedule s = *plan.schedule;
        s.slice_duration_ns = cfg.slice_duration_ns;
        s.guardband_ns = cfg.guardband_ns;
        s.validate();
        FabricTable f = deploy_topo(s);
        pending_swap = {std::move(s), std::move(f)};
        swap_at = is_static ? now
                            : ((now / delta()) + 1) * delta();
        push(swap_at, Ev::TopoSwap);
      }
      push(swap_at + cfg.propagation_delay_ns, Ev::RetireEpoch,
           static_cast<std::uint64_t>(new_epoch - 1));
    } catch (const Error&) {
      metrics.ta_aborted++;
    }
  }

  void on_topo_swap() {
    if (!pending_swap) return;
    schedule = std::move(pending_swap->first);
    fabric = std::move(pending_swap->second);
    pending_swap.reset();
    is_static = schedule.static_topology;
    if (fabric.port_span() > ports_per_node) {
      ports_per_node = fabric.port_span();
      for (NodeState& nd : nodes) {
        std::size_t active = is_static ? 0 : nd.cur_slice_abs % cfg.queues_per_port;
        while (nd.ports.size() < ports_per_node) {
          Port p;
          p.q.resize(cfg.queues_per_port);
          p.q[active].paused = false;
          nd.ports.push_back(std::move(p));
        }
      }
    }
    trace_line("deploy_topo", -1, -1, -1, epoch);
  }

  void on_retire(int old_epoch) {
    for (NodeState& nd : nodes) nd.table.retire_epoch(old_epoch);
    trace_line("retire", -1, -1, -1, old_epoch);
  }

  // --- run -------------------------------------------------------------

  Metrics run() {
    if (!have_topology) throw SchemaError("no topology preloaded");
    if (!flows.empty()) push(flows[0].spec.arrival_time_ns, Ev::FlowArrival, 0);
    if (!is_static)
      for (NodeId n = 0; n < nodes.size(); ++n) {
        Nanos t = delta() + nodes[n].clock_offset +
                  nodes[n].jitter.range(cfg.rotation_jitter_min_ns,
                                        cfg.rotation_jitter_max_ns);
        push(t, Ev::Rotate, n, 1);
      }
    else
      push(delta(), Ev::StaticSample, 1);
    push(cfg.update_interval_ns, Ev::Tick);
    if (ta_cb && ta_interval > 0) push(ta_interval, Ev::CtrlWindowClose);

    constexpr Nanos kHardCap = 1'000'000'000'000LL;  // 1000 s of sim time
    while (!events.empty()) {
      Event ev = events.top();
      events.pop();
      now = ev.t;
      if ((cfg.horizon_ns > 0 && now > cfg.horizon_ns) || now > kHardCap) {
        metrics.horizon_exceeded = true;
        break;
      }
      switch (ev.kind) {
        case Ev::FlowArrival: {
          std::uint32_t i = static_cast<std::uint32_t>(ev.a);
          Host& h = hosts[flows[i].spec.src_host];
          h.active.push_back(i);
          kick_host(flows[i].spec.src_host);
          if (i + 1 < flows.size())
            push(flows[i + 1].spec.arrival_time_ns, Ev::FlowArrival, i + 1);
          break;
        }
        case Ev::HostInject:
          on_host_inject(static_cast<HostId>(ev.a));
          break;
        case Ev::Rotate:
          on_rotate(static_cast<NodeId>(ev.a), ev.b);
          break;
        case Ev::Tick:
          on_tick();
          break;
        case Ev::TryServe:
          try_serve(static_cast<NodeId>(ev.a), static_cast<PortId>(ev.b));
          break;
        case Ev::PortFree:
          on_port_free(static_cast<NodeId>(ev.a), static_cast<PortId>(ev.b),
                       static_cast<std::uint32_t>(ev.c));
          break;
        case Ev::Deliver:
          handle_at_node(static_cast<std::uint32_t>(ev.a),
                         static_cast<NodeId>(ev.b));
          break;
        case Ev::OffloadReturn:
          on_offload_return(static_cast<std::uint32_t>(ev.a),
                            static_cast<NodeId>(ev.b));
          break;
        case Ev::PushbackRelay: {
          NodeState& nd = nodes[ev.a];
          nd.suppress_until[{static_cast<NodeId>(ev.b),
                             static_cast<SliceId>(ev.c)}] =
              now + static_cast<Nanos>(cycle()) * delta();
          break;
        }
        case Ev::SignalRelease:
          on_signal_release(static_cast<NodeId>(ev.a),
                            static_cast<NodeId>(ev.b), ev.c);
          break;
        case Ev::CtrlWindowClose:
          on_window_close();
          break;
        case Ev::CtrlCollect:
          on_collect();
          break;
        case Ev::TopoSwap:
          on_topo_swap();
          break;
        case Ev::RetireEpoch:
          on_retire(static_cast<int>(ev.a));
          break;
        case Ev::StaticSample: {
          for (NodeId n = 0; n < nodes.size(); ++n)
            close_slice_gauges(n, ev.a - 1);
          if (flows_open > 0 || outstanding > 0)
            push(static_cast<Nanos>(ev.a + 1) * delta(), Ev::StaticSample,
                 ev.a + 1);
          break;
        }
      }
      if (flows_open == 0 && outstanding == 0) break;
    }

    for (NodeId n = 0; n < nodes.size(); ++n)
      close_slice_gauges(n, is_static
                                ? static_cast<std::uint64_t>(now / delta())
                                : nodes[n].cur_slice_abs);
    metrics.end_time_ns = now;
    for (const FlowRt& f : flows) {
      FlowResult r;
      r.flow_id = f.spec.flow_id;
      r.src_host = f.spec.src_host;
      r.dst_host = f.spec.dst_host;
      r.size_bytes = f.spec.size_bytes;
      r.arrival_ns = f.spec.arrival_time_ns;
      r.completion_ns = f.completion;
      r.completed = f.completed;
      r.reorder_events = f.reorders;
      if (!f.completed) metrics.incomplete_flows.push_back(f.spec.flow_id);
      metrics.flows.push_back(r);
    }
    std::sort(metrics.flows.begin(), metrics.flows.end(),
              [](const FlowResult& a, const FlowResult& b) {
                return a.flow_id < b.flow_id;
              });
    std::sort(metrics.incomplete_flows.begin(), metrics.incomplete_flows.end());
    return metrics;
  }
};

Simulator::Simulator(SimConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}
Simulator::~Simulator() = default;

void Simulator::preload(const OpticalSchedule& schedule,
                        const std::map<NodeId, TimeFlowTable>& tables) {
  impl_->preload(schedule, tables);
}
void Simulator::set_workload(std::vector<FlowSpec> flows) {
  impl_->set_workload(std::move(flows));
}
void Simulator::set_ta_loop(Nanos interval_ns, TaCallback callback) {
  if (interval_ns <= 0) throw SchemaError("ta interval must be > 0");
  impl_->ta_interval = interval_ns;
  impl_->ta_cb = std::move(callback);
}
void Simulator::set_congestion_hook(CongestionHook hook) {
  impl_->hook = std::move(hook);
}
void Simulator::enable_trace(std::ostream* out) { impl_->trace = out; }
Metrics Simulator::run() { return impl_->run(); }

}  // namespace optonet
