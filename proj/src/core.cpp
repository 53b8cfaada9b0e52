#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "optonet/time_flow.hpp"
#include "optonet/types.hpp"

namespace optonet {

void OpticalSchedule::validate() const {
  if (slices.empty()) throw InfeasibleScheduleError("schedule has no slices");
  if (!static_topology) {
    if (guardband_ns < 0 || slice_duration_ns <= guardband_ns)
      throw InfeasibleScheduleError("slice duration must exceed guardband");
  }
  for (SliceId s = 0; s < slices.size(); ++s) {
    std::set<std::pair<NodeId, PortId>> used;
    for (const Circuit& c : slices[s]) {
      if (c.n1 >= node_count || c.n2 >= node_count) {
        std::ostringstream os;
        os << "circuit " << c.n1 << "-" << c.n2 << " references a node >= "
           << node_count;
        throw InfeasibleScheduleError(os.str());
      }
      for (auto end : {std::pair{c.n1, c.port1}, std::pair{c.n2, c.port2}}) {
        if (!used.insert(end).second) {
          std::ostringstream os;
          os << "slice " << s << ": port " << end.second << " of node "
             << end.first << " used twice";
          throw InfeasibleScheduleError(os.str());
        }
      }
    }
  }
}

std::vector<Circuit> OpticalSchedule::all_circuits() const {
  std::vector<Circuit> out;
  for (SliceId s = 0; s < slices.size(); ++s) {
    for (Circuit c : slices[s]) {
      c.ts = static_topology ? std::optional<SliceId>{} : std::optional<SliceId>{s};
      out.push_back(c);
    }
  }
  return out;
}

void TimeFlowTable::validate() const {
  std::map<std::tuple<std::optional<SliceId>, std::optional<NodeId>, NodeId>, const TimeFlowEntry*>
      seen;
  for (const TimeFlowEntry& e : entries) {
    if (e.multipath_group) continue;
    auto key = std::make_tuple(e.arr_ts, e.src, e.dst);
    auto [it, inserted] = seen.emplace(key, &e);
    if (!inserted && !(it->second->action == e.action)) {
      std::ostringstream os;
      os << "conflicting entries for key (arr="
         << (e.arr_ts ? std::to_string(*e.arr_ts) : "*") << ", src="
         << (e.src ? std::to_string(*e.src) : "*") << ", dst=" << e.dst << ")";
      throw EntryConflictError(os.str());
    }
  }
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_five_tuple(const FiveTuple& ft, std::uint64_t seed) {
  std::uint64_t h = seed;
  h = mix64(h ^ ft.src_ip);
  h = mix64(h ^ ft.dst_ip);
  h = mix64(h ^ (static_cast<std::uint64_t>(ft.src_port) << 32 | ft.dst_port));
  h = mix64(h ^ ft.proto);
  return h;
}

namespace {

// Deterministic unit-interval draw from a 64-bit hash.
double to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

const TimeFlowEntry* match_entry(const TimeFlowTable& table, SliceId arr_ts,
                                 NodeId src, NodeId dst,
                                 const HashInputs& hash) {
  const TimeFlowEntry* best = nullptr;
  for (const TimeFlowEntry& e : table.entries) {
    if (!e.matches(arr_ts, src, dst)) continue;
    if (!best || e.specificity() > best->specificity()) best = &e;
  }
  if (!best) return nullptr;
  if (!best->multipath_group) return best;

  // Gather the group members at the winning specificity and pick one by a
  // weighted draw over a deterministic hash.
  std::vector<const TimeFlowEntry*> members;
  double total = 0.0;
  for (const TimeFlowEntry& e : table.entries) {
    if (!e.matches(arr_ts, src, dst)) continue;
    if (e.specificity() != best->specificity()) continue;
    if (e.multipath_group != best->multipath_group) continue;
    members.push_back(&e);
    total += e.weight;
  }
  if (members.size() == 1 || total <= 0.0) return members.front();

  std::uint64_t h;
  if (best->multipath_mode == MultipathMode::PerFlow) {
    h = hash_five_tuple(hash.five_tuple, hash.seed);
  } else {
    h = mix64(hash.seed ^ mix64(static_cast<std::uint64_t>(hash.ingress_ts_ns)) ^
              mix64(hash.packet_nonce * 0x9e3779b97f4a7c15ULL));
  }
  double u = to_unit(h) * total;
  double acc = 0.0;
  for (const TimeFlowEntry* m : members) {
    acc += m->weight;
    if (u < acc) return m;
  }
  return members.back();
}

}  // namespace optonet
