#include "optonet/oracle.hpp"

#include <set>

#include "optonet/errors.hpp"

namespace optonet {

namespace {

bool circuit_up(const OpticalSchedule& sched, NodeId a, NodeId b, SliceId s) {
  for (const Circuit& c : sched.slices[s])
    if (c.touches(a) && c.touches(b)) return true;
  return false;
}

struct Search {
  const OpticalSchedule& sched;
  NodeId dst;
  SliceId ts;
  int max_hop;
  int bound;

  int best = -1;
  std::set<std::vector<NodeId>> best_seqs;

  std::vector<NodeId> seq;
  std::vector<char> visited;

  void step(NodeId cur, int from_offset, int hops_used) {
    if (hops_used >= max_hop) return;
    for (NodeId m = 0; m < sched.node_count; ++m) {
      if (visited[m] || m == cur) continue;
      for (int off = from_offset; off <= bound; ++off) {
        if (best >= 0 && off > best) break;
        SliceId s = static_cast<SliceId>((ts + off) % sched.cycle_length());
        if (!circuit_up(sched, cur, m, s)) continue;
        seq.push_back(m);
        if (m == dst) {
          if (best < 0 || off < best) {
            best = off;
            best_seqs.clear();
          }
          if (off == best) best_seqs.insert(seq);
        } else {
          visited[m] = 1;
          step(m, off, hops_used + 1);
          visited[m] = 0;
        }
        seq.pop_back();
      }
    }
  }
};

}  // namespace

OracleReport oracle_earliest(const OpticalSchedule& schedule, NodeId src,
                             NodeId dst, SliceId ts, int max_hop,
                             std::size_t witness_cap) {
  if (schedule.node_count > 10)
    throw TooLargeError("oracle enumeration is capped at 10 nodes");
  if (src == dst) throw Error("oracle requires src != dst");

  Search s{schedule, dst,
           ts, max_hop,
           static_cast<int>(schedule.cycle_length()) * max_hop,
           -1, {}, {}, {}};
  s.visited.assign(schedule.node_count, 0);
  s.visited[src] = 1;
  s.step(src, 0, 0);

  OracleReport rep;
  if (s.best < 0) return rep;
  rep.reachable = true;
  rep.earliest_offset = s.best;
  rep.earliest_slice =
      static_cast<SliceId>((ts + s.best) % schedule.cycle_length());
  rep.path_count = s.best_seqs.size();
  for (const auto& seq : s.best_seqs) {
    if (rep.witnesses.size() >= witness_cap) break;
    rep.witnesses.push_back(seq);
  }
  return rep;
}

}  // namespace optonet
