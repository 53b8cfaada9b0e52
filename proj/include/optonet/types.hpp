#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optonet/errors.hpp"

namespace optonet {

using NodeId = std::uint32_t;
using PortId = std::uint32_t;
using SliceId = std::uint32_t;
using HostId = std::uint32_t;
using Nanos = std::int64_t;

// Undirected full-duplex circuit between two node ports. Canonical form keeps
// n1 < n2 so a circuit compares equal no matter which end named it first.
struct Circuit {
  NodeId n1 = 0;
  PortId port1 = 0;
  NodeId n2 = 0;
  PortId port2 = 0;
  std::optional<SliceId> ts;  // absent on TA static topologies

  Circuit() = default;
  Circuit(NodeId a, PortId pa, NodeId b, PortId pb,
          std::optional<SliceId> slice = std::nullopt)
      : n1(a), port1(pa), n2(b), port2(pb), ts(slice) {
    if (a == b) throw Error("circuit endpoints must differ");
    if (n1 > n2) {
      std::swap(n1, n2);
      std::swap(port1, port2);
    }
  }

  bool touches(NodeId n) const { return n == n1 || n == n2; }
  NodeId peer_of(NodeId n) const { return n == n1 ? n2 : n1; }
  PortId port_at(NodeId n) const { return n == n1 ? port1 : port2; }

  friend bool operator==(const Circuit&, const Circuit&) = default;
  friend auto operator<=>(const Circuit&, const Circuit&) = default;
};

// Ordered list of per-slice circuit sets plus slice timing. Traffic-oblivious
// schedules rotate through all slices; a traffic-aware topology instance is a
// single slice with static_topology set, which the fabric treats as always on.
struct OpticalSchedule {
  std::size_t node_count = 0;
  std::vector<std::vector<Circuit>> slices;
  Nanos slice_duration_ns = 2000;
  Nanos guardband_ns = 200;
  bool static_topology = false;

  OpticalSchedule() = default;
  OpticalSchedule(std::size_t nodes, std::size_t cycle)
      : node_count(nodes), slices(cycle) {}

  static OpticalSchedule single(std::size_t nodes,
                                std::vector<Circuit> circuits) {
    OpticalSchedule s(nodes, 1);
    s.slices[0] = std::move(circuits);
    s.static_topology = true;
    return s;
  }

  std::size_t cycle_length() const { return slices.size(); }
  const std::vector<Circuit>& slice_circuits(SliceId s) const {
    return slices.at(s);
  }

  // Throws InfeasibleScheduleError on a per-slice port conflict or bad timing.
  void validate() const;

  // All circuits of every slice, each stamped with its slice id.
  std::vector<Circuit> all_circuits() const;
};

// Demand in bytes observed per (src node, dst node) over a collection
// interval. Diagonal is zero by construction.
class TrafficMatrix {
 public:
  TrafficMatrix() = default;
  explicit TrafficMatrix(std::size_t n) : n_(n), cells_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    if (i == j) return;
    cells_[i * n_ + j] = v;
  }
  void add(std::size_t i, std::size_t j, double v) {
    if (i == j) return;
    cells_[i * n_ + j] += v;
  }
  // Symmetric pair demand, the edge weight used by the matching generators.
  double pair_demand(std::size_t i, std::size_t j) const {
    return at(i, j) + at(j, i);
  }
  double row_sum(std::size_t i) const {
    double s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += at(i, j);
    return s;
  }
  double col_sum(std::size_t j) const {
    double s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += at(i, j);
    return s;
  }

  friend bool operator==(const TrafficMatrix&, const TrafficMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> cells_;
};

// A routing path: where it starts, the arrival slice it serves (absent for
// TA), and one (next node, departure slice) pair per hop. A hop's dep_ts
// "earlier" than the previous one means the next cycle's occurrence.
struct PathHop {
  NodeId next_node = 0;
  std::optional<SliceId> dep_ts;

  friend bool operator==(const PathHop&, const PathHop&) = default;
  friend auto operator<=>(const PathHop&, const PathHop&) = default;
};

struct Path {
  NodeId src = 0;
  NodeId dst = 0;
  std::optional<SliceId> ts;  // arrival slice at src; absent for TA
  std::vector<PathHop> hops;
  double weight = 1.0;

  friend bool operator==(const Path&, const Path&) = default;
};

}  // namespace optonet
