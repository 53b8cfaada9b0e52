#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optonet/sim.hpp"
#include "optonet/types.hpp"

namespace optonet {

// Empirical flow-size CDF held as sorted (size, cumulative probability)
// atoms; sampling is discrete inverse-transform over the atoms. Built-ins are
// synthetic heavy-tailed mixes, not production traces.
class SizeDistribution {
 public:
  static SizeDistribution from_points(
      std::vector<std::pair<std::uint64_t, double>> points);
  // "rpc-like", "kv-like", or "hadoop-like"
  static SizeDistribution builtin(const std::string& name);
  // Text file, one "size_bytes cumulative_probability" pair per line.
  static SizeDistribution from_file(const std::string& path);

  std::uint64_t sample(double u) const;  // u in [0, 1)
  double mean_bytes() const;
  const std::vector<std::pair<std::uint64_t, double>>& points() const {
    return points_;
  }

 private:
  std::vector<std::pair<std::uint64_t, double>> points_;
};

// Poisson arrivals at rate load * aggregate_core_bandwidth / mean_flow_size,
// sizes i.i.d. from the CDF, host pairs uniform without self-pairs.
// Deterministic for a fixed seed.
std::vector<FlowSpec> gen_flows(const SizeDistribution& dist, double load,
                                Nanos duration_ns, const SimConfig& capacity,
                                std::uint64_t seed);

// Re-targets a deterministic fraction of flows onto the given node pairs,
// used to shape hotspot-heavy workloads from the same generator.
void skew_flows(std::vector<FlowSpec>& flows, const SimConfig& cfg,
                const std::vector<std::pair<NodeId, NodeId>>& hot_pairs,
                double hot_fraction, std::uint64_t seed);

std::string flows_to_csv(const std::vector<FlowSpec>& flows);
std::vector<FlowSpec> flows_from_csv(const std::string& text);

}  // namespace optonet
