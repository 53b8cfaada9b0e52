#pragma once

#include <map>

#include <json.hpp>

#include "optonet/sim.hpp"
#include "optonet/time_flow.hpp"
#include "optonet/types.hpp"

namespace optonet {

using Json = nlohmann::json;

// Schedule schema: slices as arrays of [n1, p1, n2, p2]; null-free.
Json schedule_to_json(const OpticalSchedule& s);
OpticalSchedule schedule_from_json(const Json& j);

// Entry schema: records with null for wildcards.
Json entry_to_json(const TimeFlowEntry& e);
TimeFlowEntry entry_from_json(const Json& j);

Json tables_to_json(const std::map<NodeId, TimeFlowTable>& tables);
std::map<NodeId, TimeFlowTable> tables_from_json(const Json& j);

Json path_to_json(const Path& p);
Path path_from_json(const Json& j);

Json tm_to_json(const TrafficMatrix& tm);
TrafficMatrix tm_from_json(const Json& j);

// The summary block written to metrics.json.
Json metrics_to_json(const Metrics& m);

}  // namespace optonet
