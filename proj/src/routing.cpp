#include "optonet/routing.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "optonet/errors.hpp"
#include "optonet/teg.hpp"
#include "optonet/topo.hpp"

namespace optonet {

namespace {

PairList all_pairs(std::size_t node_count) {
  PairList out;
  for (NodeId s = 0; s < node_count; ++s)
    for (NodeId d = 0; d < node_count; ++d)
      if (s != d) out.emplace_back(s, d);
  return out;
}

PairList resolve_pairs(std::size_t node_count,
                       const std::optional<PairList>& pairs) {
  return pairs ? *pairs : all_pairs(node_count);
}

std::vector<std::vector<NodeId>> static_adjacency(
    const std::vector<Circuit>& circuits, std::size_t node_count) {
  std::vector<std::set<NodeId>> nb(node_count);
  for (const Circuit& c : circuits) {
    nb[c.n1].insert(c.n2);
    nb[c.n2].insert(c.n1);
  }
  std::vector<std::vector<NodeId>> adj(node_count);
  for (std::size_t i = 0; i < node_count; ++i)
    adj[i].assign(nb[i].begin(), nb[i].end());
  return adj;
}

std::vector<int> bfs_dist(const std::vector<std::vector<NodeId>>& adj,
                          NodeId from) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<NodeId> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    for (NodeId w : adj[v])
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
  }
  return dist;
}

// All shortest node sequences src..dst over the BFS DAG, in lexicographic
// order (adjacency lists are sorted).
void enumerate_shortest(const std::vector<std::vector<NodeId>>& adj,
                        const std::vector<int>& dist_to_dst, NodeId cur,
                        NodeId dst, std::vector<NodeId>& seq,
                        std::vector<std::vector<NodeId>>& out) {
  if (cur == dst) {
    out.push_back(seq);
    return;
  }
  for (NodeId nb : adj[cur]) {
    if (dist_to_dst[nb] == dist_to_dst[cur] - 1) {
      seq.push_back(nb);
      enumerate_shortest(adj, dist_to_dst, nb, dst, seq, out);
      seq.pop_back();
    }
  }
}

// Sequences include the source node, matching the Yen output shape.
std::vector<std::vector<NodeId>> shortest_sequences(
    const std::vector<std::vector<NodeId>>& adj, NodeId src, NodeId dst) {
  auto dist = bfs_dist(adj, dst);
  if (dist[src] < 0) return {};
  std::vector<NodeId> seq{src};
  std::vector<std::vector<NodeId>> out;
  enumerate_shortest(adj, dist, src, dst, seq, out);
  return out;
}

// Shortest path with nodes/edges removed, used by the Yen deviations.
// Returns the lexicographically smallest shortest node sequence.
std::optional<std::vector<NodeId>> restricted_shortest(
    const std::vector<std::vector<NodeId>>& adj, NodeId src, NodeId dst,
    const std::set<std::pair<NodeId, NodeId>>& banned_edges,
    const std::set<NodeId>& banned_nodes) {
  const std::size_t n = adj.size();
  std::vector<int> dist(n, -1);
  std::queue<NodeId> q;
  if (banned_nodes.count(dst)) return std::nullopt;
  dist[dst] = 0;
  q.push(dst);
  auto blocked = [&](NodeId a, NodeId b) {
    return banned_edges.count({a, b}) || banned_edges.count({b, a});
  };
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    for (NodeId w : adj[v]) {
      if (banned_nodes.count(w) && w != src) continue;
      if (blocked(v, w)) continue;
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
    }
  }
  if (dist[src] < 0) return std::nullopt;
  std::vector<NodeId> seq{src};
  NodeId cur = src;
  while (cur != dst) {
    bool advanced = false;
    for (NodeId nb : adj[cur]) {
      if (banned_nodes.count(nb) && nb != dst && nb != src) continue;
      if (blocked(cur, nb)) continue;
      if (dist[nb] == dist[cur] - 1) {
        seq.push_back(nb);
        cur = nb;
        advanced = true;
        break;
      }
    }
    if (!advanced) return std::nullopt;
  }
  return seq;
}

std::vector<std::vector<NodeId>> yen_ksp(
    const std::vector<std::vector<NodeId>>& adj, NodeId src, NodeId dst,
    int k) {
  std::vector<std::vector<NodeId>> found;
  auto first = restricted_shortest(adj, src, dst, {}, {});
  if (!first) return found;
  found.push_back(*first);
  auto cmp = [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  };
  std::set<std::vector<NodeId>, decltype(cmp)> candidates(cmp);
  while (static_cast<int>(found.size()) < k) {
    const auto& last = found.back();
    for (std::size_t i = 0; i + 1 < last.size(); ++i) {
      std::vector<NodeId> root(last.begin(), last.begin() + i + 1);
      std::set<std::pair<NodeId, NodeId>> banned_edges;
      for (const auto& p : found) {
        if (p.size() > i && std::equal(root.begin(), root.end(), p.begin()))
          if (p.size() > i + 1) banned_edges.insert({p[i], p[i + 1]});
      }
      std::set<NodeId> banned_nodes(root.begin(), root.end() - 1);
      auto spur = restricted_shortest(adj, root.back(), dst, banned_edges,
                                      banned_nodes);
      if (!spur) continue;
      std::vector<NodeId> total = root;
      total.insert(total.end(), spur->begin() + 1, spur->end());
      std::set<NodeId> uniq(total.begin(), total.end());
      if (uniq.size() != total.size()) continue;  // keep paths simple
      if (std::find(found.begin(), found.end(), total) == found.end())
        candidates.insert(total);
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return found;
}

Path from_sequence(NodeId src, NodeId dst, const std::vector<NodeId>& seq,
                   double weight) {
  Path p;
  p.src = src;
  p.dst = dst;
  p.weight = weight;
  for (std::size_t i = 1; i < seq.size(); ++i)
    p.hops.push_back({seq[i], std::nullopt});
  return p;
}

// adj[slice][node] for a rotating schedule
std::vector<std::vector<std::vector<NodeId>>> rotating_adjacency(
    const OpticalSchedule& schedule) {
  std::vector<std::vector<std::vector<NodeId>>> adj(
      schedule.cycle_length(),
      std::vector<std::vector<NodeId>>(schedule.node_count));
  for (SliceId s = 0; s < schedule.cycle_length(); ++s)
    for (const Circuit& c : schedule.slices[s]) {
      adj[s][c.n1].push_back(c.n2);
      adj[s][c.n2].push_back(c.n1);
    }
  for (auto& per_slice : adj)
    for (auto& v : per_slice) std::sort(v.begin(), v.end());
  return adj;
}

// Earliest slice >= from (as an offset scan over one cycle) with a circuit
// between a and b; returns the absolute slice id or nullopt.
std::optional<SliceId> earliest_slice_with(
    const std::vector<std::vector<std::vector<NodeId>>>& adj, std::size_t cycle,
    NodeId a, NodeId b, SliceId from) {
  for (std::size_t d = 0; d < cycle; ++d) {
    SliceId s = static_cast<SliceId>((from + d) % cycle);
    if (std::binary_search(adj[s][a].begin(), adj[s][a].end(), b)) return s;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Path> static_paths(const std::vector<Circuit>& topology,
                               std::size_t node_count, StaticMode mode, int k,
                               const std::optional<TrafficMatrix>& tm,
                               const std::optional<PairList>& pairs) {
  auto adj = static_adjacency(topology, node_count);
  PairList want = resolve_pairs(node_count, pairs);
  std::vector<Path> out;

  // Demand-aware edge load estimate for wcmp: each pair's demand split
  // evenly over its shortest paths.
  std::map<std::pair<NodeId, NodeId>, double> edge_load;
  const bool weighted = mode == StaticMode::Wcmp && tm.has_value();
  if (weighted) {
    for (NodeId s = 0; s < node_count; ++s)
      for (NodeId d = 0; d < node_count; ++d) {
        if (s == d || tm->at(s, d) <= 0) continue;
        auto seqs = shortest_sequences(adj, s, d);
        if (seqs.empty()) continue;
        double share = tm->at(s, d) / static_cast<double>(seqs.size());
        for (const auto& seq : seqs)
          for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            auto key = std::minmax(seq[i], seq[i + 1]);
            edge_load[{key.first, key.second}] += share;
          }
      }
  }

  for (auto [s, d] : want) {
    std::vector<std::vector<NodeId>> seqs;
    if (mode == StaticMode::Ksp) {
      if (k < 1) throw Error("ksp needs k >= 1");
      seqs = yen_ksp(adj, s, d, k);
    } else {
      seqs = shortest_sequences(adj, s, d);
    }
    if (seqs.empty()) {
      std::ostringstream os;
      os << "pair " << s << "->" << d << " unreachable on the static topology";
      throw UnreachableError(os.str());
    }
    std::vector<double> weights(seqs.size(), 1.0);
    if (weighted) {
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        double bottleneck = 1.0;
        bool first = true;
        for (std::size_t j = 0; j + 1 < seqs[i].size(); ++j) {
          auto key = std::minmax(seqs[i][j], seqs[i][j + 1]);
          double cap = 1.0 / (1.0 + edge_load[{key.first, key.second}]);
          if (first || cap < bottleneck) bottleneck = cap;
          first = false;
        }
        weights[i] = bottleneck;
      }
    }
    double wsum = 0;
    for (double w : weights) wsum += w;
    for (std::size_t i = 0; i < seqs.size(); ++i)
      out.push_back(from_sequence(s, d, seqs[i], weights[i] / wsum));
  }
  return out;
}

std::vector<Path> direct_route(const OpticalSchedule& schedule,
                               const std::optional<PairList>& pairs) {
  auto adj = rotating_adjacency(schedule);
  const std::size_t cycle = schedule.cycle_length();
  PairList want = resolve_pairs(schedule.node_count, pairs);
  std::vector<Path> out;
  for (auto [s, d] : want) {
    auto any = earliest_slice_with(adj, cycle, s, d, 0);
    if (!any) {
      std::ostringstream os;
      os << "pair " << s << "->" << d << " never shares a circuit in a cycle";
      throw UnreachableError(os.str());
    }
    for (SliceId arr = 0; arr < cycle; ++arr) {
      SliceId dep = *earliest_slice_with(adj, cycle, s, d, arr);
      Path p;
      p.src = s;
      p.dst = d;
      p.ts = arr;
      p.hops.push_back({d, dep});
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Path> vlb(const OpticalSchedule& schedule,
                      const std::optional<PairList>& pairs) {
  auto adj = rotating_adjacency(schedule);
  const std::size_t cycle = schedule.cycle_length();
  PairList want = resolve_pairs(schedule.node_count, pairs);
  std::vector<Path> out;
  for (auto [s, d] : want) {
    bool any = false;
    for (SliceId arr = 0; arr < cycle; ++arr) {
      std::vector<Path> group;
      for (NodeId w : adj[arr][s]) {
        if (w == d) {
          Path p;
          p.src = s;
          p.dst = d;
          p.ts = arr;
          p.hops.push_back({d, arr});
          group.push_back(std::move(p));
          continue;
        }
        auto dep2 = earliest_slice_with(adj, cycle, w, d, arr);
        if (!dep2) continue;  // this intermediate never reaches dst
        Path p;
        p.src = s;
        p.dst = d;
        p.ts = arr;
        p.hops.push_back({w, arr});
        p.hops.push_back({d, *dep2});
        group.push_back(std::move(p));
      }
      // A slice in which the source has no usable circuit contributes no
      // plan; only a pair with no option in any slice is unreachable.
      for (Path& p : group) {
        any = true;
        p.weight = 1.0 / static_cast<double>(group.size());
        out.push_back(std::move(p));
      }
    }
    if (!any) {
      std::ostringstream os;
      os << "pair " << s << "->" << d << " has no VLB path in any slice";
      throw UnreachableError(os.str());
    }
  }
  return out;
}

std::vector<Path> opera_paths(const OpticalSchedule& schedule, int max_hop,
                              const std::optional<PairList>& pairs) {
  auto adj = rotating_adjacency(schedule);
  PairList want = resolve_pairs(schedule.node_count, pairs);
  std::vector<Path> out;
  for (SliceId s = 0; s < schedule.cycle_length(); ++s) {
    for (auto [a, b] : want) {
      auto seqs = shortest_sequences(adj[s], a, b);
      if (seqs.empty() || static_cast<int>(seqs.front().size()) - 1 > max_hop) {
        std::ostringstream os;
        os << "slice " << s << ": pair " << a << "->" << b
           << " unreachable within the slice";
        throw SliceDisconnectedError(os.str());
      }
      for (const auto& seq : seqs) {
        Path p;
        p.src = a;
        p.dst = b;
        p.ts = s;
        p.weight = 1.0 / static_cast<double>(seqs.size());
        for (std::size_t i = 1; i < seq.size(); ++i) p.hops.push_back({seq[i], s});
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::vector<Path> ucmp_paths(const OpticalSchedule& schedule, int max_hop,
                             int k, const std::optional<PairList>& pairs) {
  if (k < 1) throw Error("ucmp needs k >= 1");
  PairList want = resolve_pairs(schedule.node_count, pairs);
  std::vector<Path> out;
  for (auto [s, d] : want) {
    for (SliceId arr = 0; arr < schedule.cycle_length(); ++arr) {
      auto cands = k_earliest_paths(schedule, s, d, arr, max_hop,
                                    static_cast<std::size_t>(k));
      double wsum = 0;
      std::vector<double> w(cands.size());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        int hops = static_cast<int>(cands[i].hops.size());
        int offset = path_arrival_offset(schedule, cands[i]);
        int waiting = std::max(0, offset - (hops - 1));
        w[i] = 1.0 / static_cast<double>(hops + waiting + 1);
        wsum += w[i];
      }
      for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].weight = w[i] / wsum;
        out.push_back(std::move(cands[i]));
      }
    }
  }
  return out;
}

std::vector<Path> hoho_paths(const OpticalSchedule& schedule, int max_hop,
                             const std::optional<PairList>& pairs) {
  if (max_hop < 1) throw Error("hoho needs max_hop >= 1");
  auto adj = rotating_adjacency(schedule);
  const std::size_t cycle = schedule.cycle_length();
  const std::size_t n = schedule.node_count;
  PairList want = resolve_pairs(n, pairs);
  std::set<NodeId> dsts;
  for (auto [s, d] : want) {
    (void)s;
    dsts.insert(d);
  }
  std::set<std::pair<NodeId, NodeId>> wanted(want.begin(), want.end());

  std::vector<Path> out;
  for (NodeId dst : dsts) {
    // Backward Dijkstra on (node, slice) states with lexicographic cost
    // (arrival offset, transit hops); next-hop ties prefer lower node ids.
    struct Val {
      int offset = -1, hops = 0;
      NodeId next = 0;
      SliceId dep = 0;
      bool set = false;
    };
    std::vector<Val> val(n * cycle);
    auto idx = [&](NodeId a, SliceId s) {
      return static_cast<std::size_t>(a) * cycle + s;
    };
    using Key = std::tuple<int, int, std::size_t>;  // offset, hops, state
    std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap;

    auto offer = [&](NodeId a, SliceId s, int offset, int hops, NodeId next,
                     SliceId dep) {
      Val& v = val[idx(a, s)];
      bool better = !v.set || std::tuple(offset, hops, next) <
                                  std::tuple(v.offset, v.hops, v.next);
      if (!better) return;
      v = {offset, hops, next, dep, true};
      heap.push({offset, hops, idx(a, s)});
    };

    for (SliceId s = 0; s < cycle; ++s)
      for (NodeId a : adj[s][dst])
        offer(a, s, 0, 1, dst, s);

    std::vector<char> done(n * cycle, 0);
    while (!heap.empty()) {
      auto [offset, hops, st] = heap.top();
      heap.pop();
      if (done[st]) continue;
      const Val v = val[st];
      if (v.offset != offset || v.hops != hops) continue;
      done[st] = 1;
      NodeId node = static_cast<NodeId>(st / cycle);
      SliceId s = static_cast<SliceId>(st % cycle);
      // Same-slice transit predecessors chain through this state.
      for (NodeId p : adj[s][node])
        if (p != dst) offer(p, s, offset, hops + 1, node, s);
      // The previous slice can wait into this state, inheriting the plan.
      SliceId prev = static_cast<SliceId>((s + cycle - 1) % cycle);
      if (node != dst) offer(node, prev, offset + 1, hops, v.next, v.dep);
    }

    for (NodeId node = 0; node < n; ++node) {
      if (node == dst || !wanted.count({node, dst})) continue;
      for (SliceId arr = 0; arr < cycle; ++arr) {
        const Val& v = val[idx(node, arr)];
        if (!v.set || v.hops > max_hop) {
          std::ostringstream os;
          os << "state (" << node << ", slice " << arr << ") cannot reach "
             << dst << " within " << max_hop << " hops";
          throw UnreachableError(os.str());
        }
        Path p;
        p.src = node;
        p.dst = dst;
        p.ts = arr;
        p.hops.push_back({v.next, v.dep});
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

namespace {

struct PendingAction {
  EntryAction action;
  double weight = 0;
};

}  // namespace

std::map<NodeId, TimeFlowTable> deploy_routing(const std::vector<Path>& paths,
                                               LookupMode lookup,
                                               MultipathPolicy multipath,
                                               const OpticalSchedule& schedule) {
  FabricTable fabric = deploy_topo(schedule);
  using Key = std::pair<std::optional<SliceId>, NodeId>;  // (arr_ts, dst)
  std::map<NodeId, std::map<Key, std::vector<PendingAction>>> staged;

  auto resolve_port = [&](NodeId at, NodeId to,
                          std::optional<SliceId> dep) -> PortId {
    SliceId s = dep.value_or(0);
    auto port = fabric.port_toward(s, at, to);
    if (!port) {
      std::ostringstream os;
      os << "hop " << at << "->" << to << " has no circuit in slice ";
      if (dep)
        os << *dep;
      else
        os << "(static)";
      throw PathInvalidError(os.str());
    }
    return *port;
  };

  auto stage = [&](NodeId node, Key key, EntryAction action, double weight) {
    auto& actions = staged[node][key];
    for (PendingAction& pa : actions)
      if (pa.action == action) {
        pa.weight += weight;
        return;
      }
    actions.push_back({std::move(action), weight});
  };

  for (const Path& path : paths) {
    if (path.hops.empty()) throw PathInvalidError("path with no hops");
    if (lookup == LookupMode::Source) {
      if (path.hops.back().next_node != path.dst)
        throw PathInvalidError("source route must terminate at dst");
      SourceRouteAction action;
      NodeId cur = path.src;
      for (const PathHop& hop : path.hops) {
        action.hops.push_back(
            {resolve_port(cur, hop.next_node, hop.dep_ts), hop.dep_ts});
        cur = hop.next_node;
      }
      stage(path.src, {path.ts, path.dst}, std::move(action), path.weight);
    } else {
      NodeId cur = path.src;
      std::optional<SliceId> arr = path.ts;
      for (const PathHop& hop : path.hops) {
        NextHopAction action{resolve_port(cur, hop.next_node, hop.dep_ts),
                             hop.dep_ts};
        stage(cur, {arr, path.dst}, action, path.weight);
        cur = hop.next_node;
        arr = hop.dep_ts;  // the packet lands at the next node in the
                           // slice it departed in
      }
    }
  }

  std::map<NodeId, TimeFlowTable> tables;
  for (auto& [node, keys] : staged) {
    TimeFlowTable& table = tables[node];
    int next_group = 0;
    for (auto& [key, actions] : keys) {
      TimeFlowEntry proto;
      proto.arr_ts = key.first;
      proto.dst = key.second;
      if (actions.size() == 1) {
        proto.action = actions.front().action;
        proto.weight = 1.0;
        table.add(proto);
        continue;
      }
      if (multipath == MultipathPolicy::None) {
        std::ostringstream os;
        os << "node " << node << ": key (arr="
           << (key.first ? std::to_string(*key.first) : "*")
           << ", dst=" << key.second << ") has " << actions.size()
           << " conflicting actions and multipath is off";
        throw EntryConflictError(os.str());
      }
      double wsum = 0;
      for (const PendingAction& pa : actions) wsum += pa.weight;
      int group = next_group++;
      for (const PendingAction& pa : actions) {
        TimeFlowEntry e = proto;
        e.action = pa.action;
        e.multipath_group = group;
        e.multipath_mode = multipath == MultipathPolicy::PerPacket
                               ? MultipathMode::PerPacket
                               : MultipathMode::PerFlow;
        e.weight = wsum > 0 ? pa.weight / wsum : 1.0;
        table.add(e);
      }
    }
  }
  return tables;
}

}  // namespace optonet
