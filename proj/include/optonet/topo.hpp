#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "optonet/types.hpp"

namespace optonet {

// Adds the circuit to its slice iff neither port is already used there.
// Rejection is signaled by the flag, not an exception.
bool connect(const Circuit& circuit, OpticalSchedule& schedule);

// Circle-method round-robin tournament schedule. Slice t assigns uplink k the
// perfect matching with index (t*uplinks + k) mod (N-1); the union over one
// cycle is the complete graph K_N. Throws InvalidNodeCountError for odd N.
OpticalSchedule round_robin(std::size_t node_count, std::size_t uplinks);

// Multi-dimensional variant: nodes are h-digit base-r numbers; slice t runs
// the circle matching floor(t/h) mod (r-1) across dimension t mod h inside
// each group of nodes sharing the other digits. Throws InvalidGridError when
// node_count != r^h.
OpticalSchedule multidim_round_robin(std::size_t side, std::size_t dims,
                                     std::size_t uplinks);

// Demand-skewed round robin: the base cycle plus duplicated slices for the
// top `dup_top` matchings ranked by demand served.
OpticalSchedule sorn(const TrafficMatrix& tm, std::size_t node_count,
                     std::size_t uplinks, std::size_t dup_top);

// Uniform mesh when tm/prev are absent; otherwise a 2-opt hill climb from
// prev that accepts swaps strictly increasing the served-demand proxy and
// changes at most change_budget circuits relative to prev.
std::vector<Circuit> jupiter_evolve(const std::optional<TrafficMatrix>& tm,
                                    const std::optional<std::vector<Circuit>>& prev,
                                    int change_budget, std::size_t node_count,
                                    std::size_t uplinks);

// The perfect matchings of the circle-method tournament on N nodes (N even):
// matchings[r] pairs every node, r in 0..N-2.
std::vector<std::vector<std::pair<NodeId, NodeId>>> circle_matchings(
    std::size_t node_count);

// --- Birkhoff decomposition ------------------------------------------------

struct BvnTerm {
  double weight = 0;
  std::vector<std::size_t> perm;  // perm[i] = column of row i
};

struct BvnDecomposition {
  std::vector<std::vector<double>> normalized;  // doubly stochastic target
  std::vector<BvnTerm> terms;                   // extraction order
};

// Normalizes tm by its max row/column sum, spreads the deficit off-diagonal,
// then peels permutations off the doubly stochastic matrix (min entry on a
// support matching each round). Terminates within n^2-2n+2 terms for a
// zero-diagonal completion.
BvnDecomposition bvn_decompose(const TrafficMatrix& tm);

// Quantizes the decomposition into total_slices slices by largest-remainder
// rounding; every positive-weight permutation keeps at least one slice when
// total_slices >= term count. Slices appear in extraction order.
OpticalSchedule bvn_schedule(const TrafficMatrix& tm, std::size_t total_slices);

// --- Deployment ------------------------------------------------------------

// Slice-indexed connectivity lookup compiled from a feasible schedule; the
// emulated fabric resolves (slice, node, port) to the circuit peer with it.
class FabricTable {
 public:
  FabricTable() = default;

  static FabricTable compile(const OpticalSchedule& schedule);

  bool wildcard_slice() const { return wildcard_; }
  std::size_t cycle_length() const { return slices_; }
  std::size_t node_count() const { return nodes_; }
  std::size_t port_span() const { return ports_; }

  std::optional<std::pair<NodeId, PortId>> peer(SliceId slice, NodeId node,
                                                PortId port) const;
  std::optional<PortId> port_toward(SliceId slice, NodeId node,
                                    NodeId peer) const;

 private:
  bool wildcard_ = false;
  std::size_t slices_ = 0, nodes_ = 0, ports_ = 0;
  // entry = (peer node << 32 | peer port) + 1, 0 means no circuit
  std::vector<std::uint64_t> lut_;
};

// Verifies per-slice port exclusivity and compiles the lookup table. Throws
// InfeasibleTopologyError naming the first conflicting circuit pair.
FabricTable deploy_topo(const OpticalSchedule& schedule);
FabricTable deploy_topo(const std::vector<Circuit>& circuits,
                        std::size_t node_count);

}  // namespace optonet
