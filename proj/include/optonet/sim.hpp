#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "optonet/time_flow.hpp"
#include "optonet/topo.hpp"
#include "optonet/types.hpp"

namespace optonet {

struct FlowSpec {
  std::uint64_t flow_id = 0;
  HostId src_host = 0;
  HostId dst_host = 0;
  std::uint64_t size_bytes = 1;
  Nanos arrival_time_ns = 0;
};

enum class CongestionReaction { Drop, Defer };
enum class RejectReason { CongestionFull, Threshold, BeyondHorizon };

struct ServiceToggles {
  bool congestion_detection = true;
  bool pushback = false;
  bool offloading = false;
  bool flow_pausing = false;
};

struct SimConfig {
  std::size_t node_count = 4;
  std::size_t uplinks = 1;
  std::size_t hosts_per_node = 1;
  std::int64_t link_bandwidth_bps = 100'000'000'000;
  Nanos slice_duration_ns = 2000;
  Nanos guardband_ns = 200;
  std::size_t queues_per_port = 16;  // K
  Nanos update_interval_ns = 120;
  std::int64_t congestion_threshold_bytes = 2'000'000;
  Nanos rotation_jitter_min_ns = 0;
  Nanos rotation_jitter_max_ns = 0;
  Nanos sync_error_ns = 0;
  Nanos propagation_delay_ns = 500;
  std::int64_t mtu_bytes = 1500;
  std::int64_t switch_buffer_bytes = 64 << 20;  // shared packet memory
  ServiceToggles services;
  CongestionReaction reaction = CongestionReaction::Drop;
  std::int64_t elephant_threshold_bytes = 1'000'000;
  Nanos notify_lead_ns = 500;
  std::uint64_t seed = 1;
  Nanos horizon_ns = 0;  // 0 = run until the workload drains

  void validate() const;
};

struct FlowResult {
  std::uint64_t flow_id = 0;
  HostId src_host = 0;
  HostId dst_host = 0;
  std::uint64_t size_bytes = 0;
  Nanos arrival_ns = 0;
  Nanos completion_ns = 0;
  bool completed = false;
  std::uint32_t reorder_events = 0;
};

// One row per simulated slice; indexes follow (node * uplinks + port).
struct SliceSample {
  std::uint64_t slice_abs = 0;
  std::vector<std::uint64_t> node_max_bytes;
  std::vector<std::uint64_t> port_max_bytes;
  std::vector<std::uint64_t> port_delivered_bits;
  std::uint64_t delivered_bytes = 0;
};

struct Metrics {
  std::uint64_t injected_packets = 0, delivered_packets = 0;
  std::uint64_t injected_bytes = 0, delivered_bytes = 0;
  std::uint64_t dropped_packets = 0, dropped_bytes = 0;
  std::map<std::string, std::uint64_t> drops_by_reason;
  std::uint64_t reorder_events = 0;
  std::uint64_t pushback_messages = 0;
  std::uint64_t offloaded_packets = 0;
  std::uint64_t return_missed = 0;
  std::uint64_t deferrals = 0;
  std::uint64_t ta_iterations = 0, ta_aborted = 0;
  // Estimate-vs-truth gap read by departing packets (the measurement that
  // sizes the guardband) and the gap the ingress admission decisions saw.
  double est_error_max_bytes = 0;
  double est_error_ingress_max_bytes = 0;
  std::uint64_t queue_wait_total_ns = 0;
  std::uint64_t queue_wait_samples = 0;
  Nanos end_time_ns = 0;
  bool horizon_exceeded = false;
  std::vector<std::uint64_t> incomplete_flows;
  std::vector<FlowResult> flows;
  std::vector<SliceSample> slices;

  double loss_rate() const {
    return injected_packets == 0
               ? 0.0
               : static_cast<double>(dropped_packets) / injected_packets;
  }
  double mean_queue_wait_ns() const {
    return queue_wait_samples == 0
               ? 0.0
               : static_cast<double>(queue_wait_total_ns) / queue_wait_samples;
  }
  // Percentile over completed flow FCTs, p in [0, 1].
  double fct_percentile_ns(double p) const;
  // Percentile over per-node per-slice max buffer samples.
  double buffer_percentile_bytes(double p) const;
  std::uint64_t peak_node_buffer_bytes() const;
};

// Buffer and bandwidth usage of one port aggregated to a caller-chosen grid.
struct TelemetrySample {
  Nanos start_ns = 0;
  std::uint64_t max_buffer_bytes = 0;
  std::uint64_t delivered_bits = 0;
};
std::vector<TelemetrySample> telemetry(const Metrics& m, const SimConfig& cfg,
                                       NodeId node, PortId port,
                                       Nanos interval_ns);

// Deployment produced by one traffic-aware controller iteration.
struct DeployPlan {
  std::optional<OpticalSchedule> schedule;  // swap topology when present
  std::map<NodeId, TimeFlowTable> tables;   // prepended at higher priority
};
using TaCallback =
    std::function<DeployPlan(const TrafficMatrix&, const OpticalSchedule&)>;

using CongestionHook =
    std::function<CongestionReaction(NodeId node, NodeId dst, SliceId slice,
                                     RejectReason reason)>;

// Deterministic discrete-event engine: switches with per-port calendar
// queues, the emulated optical fabric, hosts with pacing and hold queues, and
// the optional infrastructure services (congestion detection, push-back,
// flow pausing, buffer offloading).
class Simulator {
 public:
  explicit Simulator(SimConfig config);
  ~Simulator();

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Install the full schedule and tables before time zero (TO preload, or the
  // initial TA deployment).
  void preload(const OpticalSchedule& schedule,
               const std::map<NodeId, TimeFlowTable>& tables);
  void set_workload(std::vector<FlowSpec> flows);
  // Reconfiguration loop: collect a TM every interval and apply the plan the
  // callback returns; routing deploys before the topology switches.
  void set_ta_loop(Nanos interval_ns, TaCallback callback);
  void set_congestion_hook(CongestionHook hook);
  void enable_trace(std::ostream* out);

  Metrics run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace optonet
