#pragma once

#include <cstddef>
#include <vector>

#include "optonet/types.hpp"

namespace optonet {

// State graph over (node, slice) pairs for one optical cycle. Transit edges
// connect the two ends of a circuit within its slice; wait edges advance a
// node from slice s to slice (s+1) mod cycle.
struct TimeExpandedGraph {
  std::size_t node_count = 0;
  std::size_t cycle_length = 0;
  // transit[state] = sorted peer nodes reachable in the same slice,
  // state = node * cycle_length + slice.
  std::vector<std::vector<NodeId>> transit;

  std::size_t state(NodeId n, SliceId s) const {
    return static_cast<std::size_t>(n) * cycle_length + s;
  }
  std::size_t state_count() const { return node_count * cycle_length; }
  std::size_t transit_edge_count() const;  // directed count (2 per circuit)
  std::size_t edge_count() const {          // transit + wait edges
    return transit_edge_count() + state_count();
  }
  bool has_transit(NodeId a, NodeId b, SliceId s) const;
};

// Throws InfeasibleScheduleError if a port appears twice in one slice.
TimeExpandedGraph build_teg(const OpticalSchedule& schedule);

// Nodes sharing a circuit with `node` in slice `ts`; with ts absent, the
// union over all slices (the TA topology-instance case). Sorted, unique.
std::vector<NodeId> neighbors(const OpticalSchedule& schedule, NodeId node,
                              std::optional<SliceId> ts = std::nullopt);

// All minimum-arrival-slice paths from (src, ts) with at most max_hop transit
// edges, sorted by (arrival slice offset, hop count, lexicographic node
// sequence). Waiting at a node consumes slices but not hops. Throws
// UnreachableError if nothing arrives within cycle_length * max_hop slices.
std::vector<Path> earliest_path(const OpticalSchedule& schedule, NodeId src,
                                NodeId dst, SliceId ts, int max_hop);

// The k earliest-arrival paths in the same order; spans several arrival
// slices when the minimum-arrival set is smaller than k.
std::vector<Path> k_earliest_paths(const OpticalSchedule& schedule, NodeId src,
                                   NodeId dst, SliceId ts, int max_hop,
                                   std::size_t k);

// Slice offset (relative to the path's arrival slice) at which the last hop
// departs; the "arrival slice" of a cross-slice path.
int path_arrival_offset(const OpticalSchedule& schedule, const Path& path);

}  // namespace optonet
