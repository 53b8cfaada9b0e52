#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "optonet/types.hpp"

namespace optonet {

enum class MultipathMode { PerPacket, PerFlow };

struct NextHopAction {
  PortId egress_port = 0;
  std::optional<SliceId> dep_ts;  // wildcard = forward immediately

  friend bool operator==(const NextHopAction&, const NextHopAction&) = default;
};

struct SourceRouteHop {
  PortId egress_port = 0;
  std::optional<SliceId> dep_ts;

  friend bool operator==(const SourceRouteHop&, const SourceRouteHop&) = default;
};

struct SourceRouteAction {
  std::vector<SourceRouteHop> hops;

  friend bool operator==(const SourceRouteAction&, const SourceRouteAction&) = default;
};

using EntryAction = std::variant<NextHopAction, SourceRouteAction>;

// One match/action record. Wildcard arr_ts plus a wildcard departure reduces
// the entry to a classical flow-table entry.
struct TimeFlowEntry {
  std::optional<SliceId> arr_ts;  // match: arrival slice (wildcard if absent)
  std::optional<NodeId> src;      // match: source node (wildcard if absent)
  NodeId dst = 0;                 // match: destination node
  EntryAction action;
  std::optional<int> multipath_group;
  MultipathMode multipath_mode = MultipathMode::PerFlow;
  double weight = 1.0;  // relative weight inside a multipath group
  int epoch = 0;        // deployment batch tag, used for entry retirement

  bool matches(SliceId arr, NodeId source, NodeId destination) const {
    if (dst != destination) return false;
    if (arr_ts && *arr_ts != arr) return false;
    if (src && *src != source) return false;
    return true;
  }
  // Exact fields beat wildcards; two exact fields beat one.
  int specificity() const {
    return (arr_ts ? 1 : 0) + (src ? 1 : 0);
  }

  friend bool operator==(const TimeFlowEntry&, const TimeFlowEntry&) = default;
};

struct FiveTuple {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;
};

// Everything a lookup may hash on: the five tuple for per-flow selection, the
// ingress timestamp plus a per-packet nonce for per-packet selection.
struct HashInputs {
  FiveTuple five_tuple;
  Nanos ingress_ts_ns = 0;
  std::uint64_t packet_nonce = 0;
  std::uint64_t seed = 0;
};

// Ordered entry list. Lower index means higher priority within the same
// specificity class, so deployments that prepend shadow older routes.
struct TimeFlowTable {
  std::vector<TimeFlowEntry> entries;

  void add(TimeFlowEntry e) { entries.push_back(std::move(e)); }
  void add_front(std::vector<TimeFlowEntry> batch) {
    entries.insert(entries.begin(), batch.begin(), batch.end());
  }
  void retire_epoch(int epoch) {
    std::erase_if(entries, [epoch](const TimeFlowEntry& e) { return e.epoch == epoch; });
  }

  // Throws EntryConflictError if two non-multipath entries share a key.
  void validate() const;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_five_tuple(const FiveTuple& ft, std::uint64_t seed);

// Highest-precedence match, resolving multipath groups by hashing. Returns
// nullptr when nothing matches; the caller decides whether to drop or punt.
const TimeFlowEntry* match_entry(const TimeFlowTable& table, SliceId arr_ts,
                                 NodeId src, NodeId dst,
                                 const HashInputs& hash);

}  // namespace optonet
