#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "optonet/time_flow.hpp"
#include "optonet/types.hpp"

namespace optonet {

enum class LookupMode { PerHop, Source };
enum class MultipathPolicy { None, PerFlow, PerPacket };
enum class StaticMode { Ecmp, Wcmp, Ksp };

using PairList = std::vector<std::pair<NodeId, NodeId>>;

// Static-topology path sets (TA architectures): all shortest paths with equal
// (ecmp) or demand-aware (wcmp) weights, or Yen's k shortest simple paths.
// All dep_ts fields stay wildcard. Throws UnreachableError per pair.
std::vector<Path> static_paths(const std::vector<Circuit>& topology,
                               std::size_t node_count, StaticMode mode, int k,
                               const std::optional<TrafficMatrix>& tm,
                               const std::optional<PairList>& pairs = {});

// Single-hop plans that wait at the source for the earliest slice carrying a
// direct circuit, one per (src, dst, arrival slice).
std::vector<Path> direct_route(const OpticalSchedule& schedule,
                               const std::optional<PairList>& pairs = {});

// Valiant load balancing: spray over every current neighbor as the
// intermediate, plus the direct hop when the destination is itself a current
// neighbor; equal-weight per-packet multipath per (src, dst, arrival slice).
std::vector<Path> vlb(const OpticalSchedule& schedule,
                      const std::optional<PairList>& pairs = {});

// All shortest paths inside each slice's own topology, emitted as source
// routes whose hops all depart in the arrival slice. Throws
// SliceDisconnectedError naming the slice and pair.
std::vector<Path> opera_paths(const OpticalSchedule& schedule, int max_hop,
                              const std::optional<PairList>& pairs = {});

// The k earliest-arrival paths per (src, dst, arrival slice), weighted
// proportionally to 1/(transit hops + waiting slices + 1) and normalized;
// waiting counts slices spent beyond the one-slice-per-hop pipeline.
std::vector<Path> ucmp_paths(const OpticalSchedule& schedule, int max_hop,
                             int k, const std::optional<PairList>& pairs = {});

// Per-hop plan: for every (node, dst, arrival slice) state the next hop that
// minimizes earliest arrival at dst over the time-expanded graph, ties broken
// by fewer remaining hops then lowest node id. Each plan fragment is a
// one-hop Path; deferral at runtime retries the entry of the next slice.
std::vector<Path> hoho_paths(const OpticalSchedule& schedule, int max_hop,
                             const std::optional<PairList>& pairs = {});

// Compiles paths into per-node time-flow tables. Per-hop lookup spreads each
// path across its nodes keyed (arrival slice at the node, dst); source lookup
// keeps the whole hop stack in the entry at the source node. Same-key paths
// become a multipath group under the given policy; with policy None a key
// with two distinct actions raises EntryConflictError. A hop without its
// circuit in the departure slice raises PathInvalidError.
std::map<NodeId, TimeFlowTable> deploy_routing(const std::vector<Path>& paths,
                                               LookupMode lookup,
                                               MultipathPolicy multipath,
                                               const OpticalSchedule& schedule);

}  // namespace optonet
