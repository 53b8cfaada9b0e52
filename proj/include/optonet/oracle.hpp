#pragma once

#include <vector>

#include "optonet/types.hpp"

namespace optonet {

// Result of exhaustively enumerating hop sequences over a schedule.
struct OracleReport {
  bool reachable = false;
  int earliest_offset = -1;    // slices after ts of the final transit
  SliceId earliest_slice = 0;  // (ts + earliest_offset) mod cycle
  std::size_t path_count = 0;  // node sequences achieving the earliest arrival
  std::vector<std::vector<NodeId>> witnesses;  // capped listing of sequences
};

// Brute-force earliest-arrival search used as an independent cross-check for
// the routing engine. Tries every departure offset explicitly instead of the
// engine's greedy/bfs machinery. Enforces node_count <= 10 (TooLargeError).
OracleReport oracle_earliest(const OpticalSchedule& schedule, NodeId src,
                             NodeId dst, SliceId ts, int max_hop,
                             std::size_t witness_cap = 8);

}  // namespace optonet
