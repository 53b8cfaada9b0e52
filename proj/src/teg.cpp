#include "optonet/teg.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace optonet {

std::size_t TimeExpandedGraph::transit_edge_count() const {
  std::size_t c = 0;
  for (const auto& v : transit) c += v.size();
  return c;
}

bool TimeExpandedGraph::has_transit(NodeId a, NodeId b, SliceId s) const {
  const auto& peers = transit[state(a, s)];
  return std::binary_search(peers.begin(), peers.end(), b);
}

TimeExpandedGraph build_teg(const OpticalSchedule& schedule) {
  schedule.validate();
  TimeExpandedGraph g;
  g.node_count = schedule.node_count;
  g.cycle_length = schedule.cycle_length();
  g.transit.assign(g.state_count(), {});
  for (SliceId s = 0; s < g.cycle_length; ++s) {
    for (const Circuit& c : schedule.slices[s]) {
      g.transit[g.state(c.n1, s)].push_back(c.n2);
      g.transit[g.state(c.n2, s)].push_back(c.n1);
    }
  }
  for (auto& peers : g.transit) std::sort(peers.begin(), peers.end());
  return g;
}

std::vector<NodeId> neighbors(const OpticalSchedule& schedule, NodeId node,
                              std::optional<SliceId> ts) {
  std::set<NodeId> out;
  auto scan = [&](SliceId s) {
    for (const Circuit& c : schedule.slices[s])
      if (c.touches(node)) out.insert(c.peer_of(node));
  };
  if (ts) {
    scan(*ts);
  } else {
    for (SliceId s = 0; s < schedule.cycle_length(); ++s) scan(s);
  }
  return {out.begin(), out.end()};
}

namespace {

// adj[slice][node] = sorted peer nodes in that slice
std::vector<std::vector<std::vector<NodeId>>> slice_adjacency(
    const OpticalSchedule& schedule) {
  std::vector<std::vector<std::vector<NodeId>>> adj(
      schedule.cycle_length(),
      std::vector<std::vector<NodeId>>(schedule.node_count));
  for (SliceId s = 0; s < schedule.cycle_length(); ++s) {
    for (const Circuit& c : schedule.slices[s]) {
      adj[s][c.n1].push_back(c.n2);
      adj[s][c.n2].push_back(c.n1);
    }
  }
  for (auto& per_slice : adj)
    for (auto& peers : per_slice) std::sort(peers.begin(), peers.end());
  return adj;
}

// Earliest slice offset >= from at which a circuit (a, b) is up, or -1.
// Only one cycle needs scanning: the schedule repeats.
int earliest_occurrence(const std::vector<std::vector<std::vector<NodeId>>>& adj,
                        SliceId base_ts, std::size_t cycle, NodeId a, NodeId b,
                        int from) {
  for (int d = 0; d < static_cast<int>(cycle); ++d) {
    int off = from + d;
    SliceId s = static_cast<SliceId>((base_ts + off) % cycle);
    const auto& peers = adj[s][a];
    if (std::binary_search(peers.begin(), peers.end(), b)) return off;
  }
  return -1;
}

struct Enumerator {
  const OpticalSchedule& schedule;
  std::vector<std::vector<std::vector<NodeId>>> adj;
  NodeId src, dst;
  SliceId ts;
  int max_hop;
  int target;  // collect paths whose arrival offset equals this
  std::vector<Path>* out;

  std::vector<NodeId> seq;
  std::vector<int> deps;
  std::vector<char> visited;

  void run() {
    visited.assign(schedule.node_count, 0);
    visited[src] = 1;
    dfs(src, 0);
  }

  void dfs(NodeId cur, int min_off) {
    if (static_cast<int>(seq.size()) >= max_hop) return;
    std::set<NodeId> peers;
    for (SliceId s = 0; s < schedule.cycle_length(); ++s)
      for (NodeId p : adj[s][cur])
        if (!visited[p]) peers.insert(p);
    for (NodeId next : peers) {
      int dep = earliest_occurrence(adj, ts, schedule.cycle_length(), cur,
                                    next, min_off);
      if (dep < 0 || dep > target) continue;
      seq.push_back(next);
      deps.push_back(dep);
      if (next == dst) {
        if (dep == target) emit();
      } else {
        visited[next] = 1;
        dfs(next, dep);
        visited[next] = 0;
      }
      seq.pop_back();
      deps.pop_back();
    }
  }

  void emit() {
    Path p;
    p.src = src;
    p.dst = dst;
    p.ts = ts;
    for (std::size_t i = 0; i < seq.size(); ++i)
      p.hops.push_back({seq[i], static_cast<SliceId>(
                                    (ts + deps[i]) % schedule.cycle_length())});
    out->push_back(std::move(p));
  }
};

void sort_paths(std::vector<Path>& paths) {
  std::stable_sort(paths.begin(), paths.end(),
                   [](const Path& a, const Path& b) {
                     if (a.hops.size() != b.hops.size())
                       return a.hops.size() < b.hops.size();
                     for (std::size_t i = 0;
                          i < std::min(a.hops.size(), b.hops.size()); ++i)
                       if (a.hops[i].next_node != b.hops[i].next_node)
                         return a.hops[i].next_node < b.hops[i].next_node;
                     return false;
                   });
}

}  // namespace

int path_arrival_offset(const OpticalSchedule& schedule, const Path& path) {
  if (path.hops.empty()) return 0;
  const int cycle = static_cast<int>(schedule.cycle_length());
  if (!path.ts || !path.hops.front().dep_ts) return 0;  // TA, no slicing
  int off = (static_cast<int>(*path.hops.front().dep_ts) -
             static_cast<int>(*path.ts) + cycle) %
            cycle;
  for (std::size_t i = 1; i < path.hops.size(); ++i) {
    int prev = static_cast<int>(*path.hops[i - 1].dep_ts);
    int cur = static_cast<int>(*path.hops[i].dep_ts);
    off += (cur - prev + cycle) % cycle;
  }
  return off;
}

std::vector<Path> k_earliest_paths(const OpticalSchedule& schedule, NodeId src,
                                   NodeId dst, SliceId ts, int max_hop,
                                   std::size_t k) {
  if (src == dst) throw Error("earliest_path requires src != dst");
  if (max_hop < 1) throw Error("max_hop must be >= 1");
  schedule.validate();
  const int bound = static_cast<int>(schedule.cycle_length()) * max_hop;

  std::vector<Path> all;
  Enumerator en{schedule, slice_adjacency(schedule), src, dst, ts,
                max_hop,  0,                         &all,
                {},       {},                        {}};
  bool first_found = false;
  for (int target = 0; target <= bound; ++target) {
    en.target = target;
    std::vector<Path> batch;
    en.out = &batch;
    en.run();
    if (!batch.empty()) {
      first_found = true;
      sort_paths(batch);
      all.insert(all.end(), batch.begin(), batch.end());
    }
    if (all.size() >= k) break;
    // Every reachable destination is reached within one cycle per hop, so
    // once something was found the remaining targets add only later paths.
    if (!first_found && target == bound) break;
  }
  if (all.empty()) {
    std::ostringstream os;
    os << "no path " << src << "->" << dst << " from slice " << ts << " within "
       << max_hop << " hops";
    throw UnreachableError(os.str());
  }
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<Path> earliest_path(const OpticalSchedule& schedule, NodeId src,
                                NodeId dst, SliceId ts, int max_hop) {
  if (src == dst) throw Error("earliest_path requires src != dst");
  if (max_hop < 1) throw Error("max_hop must be >= 1");
  schedule.validate();
  const int bound = static_cast<int>(schedule.cycle_length()) * max_hop;
  std::vector<Path> out;
  Enumerator en{schedule, slice_adjacency(schedule), src, dst, ts,
                max_hop,  0,                         &out,
                {},       {},                        {}};
  for (int target = 0; target <= bound; ++target) {
    en.target = target;
    en.out = &out;
    en.run();
    if (!out.empty()) break;
  }
  if (out.empty()) {
    std::ostringstream os;
    os << "no path " << src << "->" << dst << " from slice " << ts << " within "
       << max_hop << " hops";
    throw UnreachableError(os.str());
  }
  sort_paths(out);
  return out;
}

}  // namespace optonet
