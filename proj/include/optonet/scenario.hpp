#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "optonet/json_io.hpp"
#include "optonet/routing.hpp"
#include "optonet/sim.hpp"
#include "optonet/workload.hpp"

namespace optonet {

// Pluggable topology generator, dispatched by name from the scenario file.
// tm is empty (size 0) at preload time; prev is null at preload time.
using TopoGenerator = std::function<OpticalSchedule(
    const Json& params, const SimConfig& cfg, const TrafficMatrix& tm,
    const OpticalSchedule* prev)>;

void register_topo_generator(const std::string& name, TopoGenerator gen);

struct Scenario {
  std::string name = "scenario";
  SimConfig sim;
  Json topo;      // {"algo": ..., ...}
  Json routing;   // {"algo": ..., "lookup": ..., "multipath": ..., ...}
  Json workload;  // {"cdf": ..., "load": ..., "duration_ns": ..., ...}
  std::string workflow = "to";  // "to" | "ta" | "hybrid"
  Nanos ta_interval_ns = 0;
};

Json simconfig_to_json(const SimConfig& c);
SimConfig simconfig_from_json(const Json& j);

Scenario scenario_from_json(const Json& j);
Scenario load_scenario(const std::string& path);
// Fully-resolved snapshot; loading and running it reproduces the run.
Json scenario_to_json(const Scenario& sc);

OpticalSchedule build_topology(const Scenario& sc, const TrafficMatrix& tm,
                               const OpticalSchedule* prev);
std::map<NodeId, TimeFlowTable> build_routing(const Scenario& sc,
                                              const OpticalSchedule& schedule);
std::vector<FlowSpec> build_workload(const Scenario& sc);

struct RunOutput {
  Metrics metrics;
  Json resolved;
};

RunOutput run_scenario(const Scenario& sc, std::ostream* trace = nullptr);

// Feasibility findings without running; "error"-level findings make
// cmd_validate exit nonzero.
struct Finding {
  std::string level;  // "error" | "warning"
  std::string code;
  std::string detail;
};
std::vector<Finding> validate_scenario(const Scenario& sc);

}  // namespace optonet
