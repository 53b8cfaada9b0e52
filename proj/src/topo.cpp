#include "optonet/topo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "optonet/errors.hpp"

namespace optonet {

bool connect(const Circuit& circuit, OpticalSchedule& schedule) {
  SliceId s = circuit.ts.value_or(0);
  if (s >= schedule.cycle_length())
    throw Error("connect: slice out of range");
  if (circuit.n1 >= schedule.node_count || circuit.n2 >= schedule.node_count)
    throw Error("connect: node out of range");
  for (const Circuit& c : schedule.slices[s]) {
    if ((c.n1 == circuit.n1 && c.port1 == circuit.port1) ||
        (c.n2 == circuit.n1 && c.port2 == circuit.port1) ||
        (c.n1 == circuit.n2 && c.port1 == circuit.port2) ||
        (c.n2 == circuit.n2 && c.port2 == circuit.port2))
      return false;
  }
  Circuit copy = circuit;
  copy.ts = schedule.static_topology ? std::optional<SliceId>{} : std::optional<SliceId>{s};
  schedule.slices[s].push_back(copy);
  return true;
}

std::vector<std::vector<std::pair<NodeId, NodeId>>> circle_matchings(
    std::size_t node_count) {
  if (node_count % 2 != 0 || node_count < 2)
    throw InvalidNodeCountError("circle method needs an even node count >= 2");
  const std::size_t n = node_count;
  const std::size_t rounds = n - 1;
  std::vector<std::vector<std::pair<NodeId, NodeId>>> out(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    auto& m = out[r];
    m.emplace_back(static_cast<NodeId>(n - 1), static_cast<NodeId>(r));
    for (std::size_t i = 1; i < n / 2; ++i) {
      NodeId a = static_cast<NodeId>((r + i) % rounds);
      NodeId b = static_cast<NodeId>((r + rounds - i) % rounds);
      m.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(m.begin(), m.end());
  }
  return out;
}

OpticalSchedule round_robin(std::size_t node_count, std::size_t uplinks) {
  if (node_count % 2 != 0 || node_count < 4)
    throw InvalidNodeCountError("round_robin needs an even node count >= 4");
  if (uplinks < 1 || uplinks > node_count - 1)
    throw Error("round_robin: uplinks must be in [1, N-1]");
  auto matchings = circle_matchings(node_count);
  const std::size_t rounds = node_count - 1;
  const std::size_t cycle = (rounds + uplinks - 1) / uplinks;
  OpticalSchedule sched(node_count, cycle);
  for (SliceId t = 0; t < cycle; ++t) {
    for (std::size_t k = 0; k < uplinks; ++k) {
      const auto& m = matchings[(t * uplinks + k) % rounds];
      for (auto [a, b] : m)
        sched.slices[t].emplace_back(a, static_cast<PortId>(k), b,
                                     static_cast<PortId>(k), t);
    }
  }
  return sched;
}

OpticalSchedule multidim_round_robin(std::size_t side, std::size_t dims,
                                     std::size_t uplinks) {
  if (side % 2 != 0 || side < 2)
    throw InvalidGridError("multidim round robin needs an even side");
  if (dims < 1) throw InvalidGridError("dims must be >= 1");
  std::size_t node_count = 1;
  for (std::size_t d = 0; d < dims; ++d) {
    node_count *= side;
    if (node_count > 1u << 20) throw InvalidGridError("grid too large");
  }
  if (uplinks < 1) throw Error("uplinks must be >= 1");
  auto matchings = circle_matchings(side);
  const std::size_t slots = dims * (side - 1);
  const std::size_t cycle = (slots + uplinks - 1) / uplinks;
  OpticalSchedule sched(node_count, cycle);

  std::size_t stride = 1;  // digit stride per dimension
  std::vector<std::size_t> strides(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    strides[d] = stride;
    stride *= side;
  }

  for (SliceId t = 0; t < cycle; ++t) {
    for (std::size_t k = 0; k < uplinks; ++k) {
      std::size_t slot = (t * uplinks + k) % slots;
      std::size_t d = slot % dims;
      std::size_t m = (slot / dims) % (side - 1);
      // Pair nodes within each group that shares all digits except digit d.
      for (NodeId node = 0; node < node_count; ++node) {
        std::size_t digit = (node / strides[d]) % side;
        if (digit != 0) continue;  // one enumeration pass per group
        std::size_t group_base = node;  // digit d already zero here
        for (auto [va, vb] : matchings[m]) {
          NodeId a = static_cast<NodeId>(group_base + va * strides[d]);
          NodeId b = static_cast<NodeId>(group_base + vb * strides[d]);
          sched.slices[t].emplace_back(a, static_cast<PortId>(k), b,
                                       static_cast<PortId>(k), t);
        }
      }
    }
  }
  return sched;
}

namespace {

double matching_demand(const TrafficMatrix& tm,
                       const std::vector<std::pair<NodeId, NodeId>>& m) {
  double s = 0;
  for (auto [a, b] : m) s += tm.pair_demand(a, b);
  return s;
}

}  // namespace

OpticalSchedule sorn(const TrafficMatrix& tm, std::size_t node_count,
                     std::size_t uplinks, std::size_t dup_top) {
  OpticalSchedule base = round_robin(node_count, uplinks);
  auto matchings = circle_matchings(node_count);
  std::vector<std::size_t> order(matchings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return matching_demand(tm, matchings[a]) > matching_demand(tm, matchings[b]);
  });
  dup_top = std::min(dup_top, order.size());
  for (std::size_t i = 0; i < dup_top; ++i) {
    const auto& m = matchings[order[i]];
    SliceId t = static_cast<SliceId>(base.slices.size());
    base.slices.emplace_back();
    for (std::size_t k = 0; k < uplinks; ++k)
      for (auto [a, b] : m)
        base.slices[t].emplace_back(a, static_cast<PortId>(k), b,
                                    static_cast<PortId>(k), t);
  }
  return base;
}

std::vector<Circuit> jupiter_evolve(const std::optional<TrafficMatrix>& tm,
                                    const std::optional<std::vector<Circuit>>& prev,
                                    int change_budget, std::size_t node_count,
                                    std::size_t uplinks) {
  if (change_budget < 0) throw Error("change_budget must be >= 0");
  if (!tm) {
    if (prev) return *prev;
    // Uniform mesh: stripe each node's uplinks round-robin over the circle
    // matchings, one matching per uplink index.
    auto matchings = circle_matchings(node_count);
    std::vector<Circuit> mesh;
    for (std::size_t k = 0; k < uplinks; ++k)
      for (auto [a, b] : matchings[k % matchings.size()])
        mesh.emplace_back(a, static_cast<PortId>(k), b, static_cast<PortId>(k));
    return mesh;
  }

  std::vector<Circuit> cur = prev.value_or(std::vector<Circuit>{});
  if (cur.empty())
    cur = jupiter_evolve(std::nullopt, std::nullopt, 0, node_count, uplinks);
  const std::vector<Circuit> baseline = cur;

  auto gain = [&](const Circuit& c) { return tm->pair_demand(c.n1, c.n2); };
  // Reconfigured topologies must stay connected graphs; a swap that cuts the
  // fabric is not a candidate no matter how much demand it serves.
  auto connected = [&](const std::vector<Circuit>& set) {
    std::vector<std::vector<NodeId>> adj(node_count);
    for (const Circuit& c : set) {
      adj[c.n1].push_back(c.n2);
      adj[c.n2].push_back(c.n1);
    }
    std::vector<char> seen(node_count, 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          visited++;
          stack.push_back(w);
        }
    }
    return visited == node_count;
  };
  auto diff_from_prev = [&](const std::vector<Circuit>& set) {
    int d = 0;
    for (const Circuit& c : set) {
      bool found = false;
      for (const Circuit& p : baseline)
        if (p.n1 == c.n1 && p.n2 == c.n2 && p.port1 == c.port1 &&
            p.port2 == c.port2) {
          found = true;
          break;
        }
      if (!found) ++d;
    }
    return d;
  };

  bool improved = true;
  while (improved) {
    improved = false;
    double best_delta = 0;
    int best_variant = -1;
    std::vector<Circuit> best_set;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (std::size_t j = i + 1; j < cur.size(); ++j) {
        const Circuit a = cur[i];
        const Circuit b = cur[j];
        std::set<NodeId> nodes{a.n1, a.n2, b.n1, b.n2};
        if (nodes.size() != 4) continue;  // shared endpoint, not a 2-opt move
        const double old_gain = gain(a) + gain(b);
        // Re-pair the four endpoints the other two ways, reusing the ports
        // freed by the removed circuits.
        const Circuit variants[2][2] = {
            {Circuit(a.n1, a.port1, b.n1, b.port1),
             Circuit(a.n2, a.port2, b.n2, b.port2)},
            {Circuit(a.n1, a.port1, b.n2, b.port2),
             Circuit(a.n2, a.port2, b.n1, b.port1)}};
        for (int v = 0; v < 2; ++v) {
          double delta = gain(variants[v][0]) + gain(variants[v][1]) - old_gain;
          if (delta <= best_delta) continue;
          std::vector<Circuit> cand = cur;
          cand[i] = variants[v][0];
          cand[j] = variants[v][1];
          if (diff_from_prev(cand) > change_budget) continue;
          if (connected(cur) && !connected(cand)) continue;
          best_delta = delta;
          best_variant = v;
          best_set = std::move(cand);
        }
      }
    }
    if (best_variant >= 0) {
      cur = std::move(best_set);
      improved = true;
    }
  }
  return cur;
}

// --- BvN -------------------------------------------------------------------

namespace {

constexpr double kBvnEps = 1e-12;

// Bipartite perfect matching on the positive support (augmenting paths).
bool support_matching(const std::vector<std::vector<double>>& m,
                      std::vector<std::size_t>& row_to_col) {
  const std::size_t n = m.size();
  std::vector<int> col_owner(n, -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> tryrow = [&](std::size_t r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (m[r][c] <= kBvnEps || seen[c]) continue;
      seen[c] = 1;
      if (col_owner[c] < 0 || tryrow(static_cast<std::size_t>(col_owner[c]))) {
        col_owner[c] = static_cast<int>(r);
        return true;
      }
    }
    return false;
  };
  for (std::size_t r = 0; r < n; ++r) {
    seen.assign(n, 0);
    if (!tryrow(r)) return false;
  }
  row_to_col.assign(n, 0);
  for (std::size_t c = 0; c < n; ++c)
    if (col_owner[c] >= 0) row_to_col[static_cast<std::size_t>(col_owner[c])] = c;
  return true;
}

}  // namespace

BvnDecomposition bvn_decompose(const TrafficMatrix& tm) {
  const std::size_t n = tm.size();
  if (n < 2) throw Error("bvn needs at least 2 nodes");
  BvnDecomposition out;

  double scale = 0;
  for (std::size_t i = 0; i < n; ++i)
    scale = std::max({scale, tm.row_sum(i), tm.col_sum(i)});

  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  if (scale > 0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) d[i][j] = tm.at(i, j) / scale;
  }

  // Complete to doubly stochastic: spread the deficit off-diagonal in
  // proportion to the row/column deficits, then repair the leftovers the
  // diagonal exclusion produced. The diagonal is a last resort only.
  std::vector<double> rdef(n), cdef(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0, cs = 0;
    for (std::size_t j = 0; j < n; ++j) {
      rs += d[i][j];
      cs += d[j][i];
    }
    rdef[i] = 1.0 - rs;
    cdef[i] = 1.0 - cs;
    total += rdef[i];
  }
  if (total > kBvnEps) {
    auto radd = rdef, cadd = cdef;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) {
          double a = rdef[i] * cdef[j] / total;
          d[i][j] += a;
          radd[i] -= a;
          cadd[j] -= a;
        }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n && radd[i] > kBvnEps; ++j) {
        if (i == j) continue;
        double a = std::min(radd[i], cadd[j]);
        if (a <= 0) continue;
        d[i][j] += a;
        radd[i] -= a;
        cadd[j] -= a;
      }
    for (std::size_t i = 0; i < n; ++i)
      if (radd[i] > kBvnEps) {
        d[i][i] += radd[i];  // Hall-violating corner case
        radd[i] = 0;
      }
  }
  out.normalized = d;

  auto work = d;
  double extracted = 0;
  const std::size_t hard_cap = n * n + 2;
  for (std::size_t round = 0; round < hard_cap; ++round) {
    if (extracted >= 1.0 - 1e-12) break;
    std::vector<std::size_t> perm;
    if (!support_matching(work, perm)) break;
    double w = 2.0;
    for (std::size_t i = 0; i < n; ++i) w = std::min(w, work[i][perm[i]]);
    if (w <= kBvnEps) break;
    for (std::size_t i = 0; i < n; ++i) {
      work[i][perm[i]] -= w;
      if (work[i][perm[i]] < kBvnEps) work[i][perm[i]] = 0;
    }
    out.terms.push_back({w, perm});
    extracted += w;
  }
  return out;
}

OpticalSchedule bvn_schedule(const TrafficMatrix& tm,
                             std::size_t total_slices) {
  if (total_slices < 1) throw Error("total_slices must be >= 1");
  auto dec = bvn_decompose(tm);
  const std::size_t n = tm.size();
  const std::size_t terms = dec.terms.size();
  std::vector<std::size_t> alloc(terms, 0);

  if (terms > 0) {
    double wsum = 0;
    for (auto& t : dec.terms) wsum += t.weight;
    std::size_t reserve = total_slices >= terms ? terms : 0;
    std::size_t rest = total_slices - (reserve ? terms : 0);
    std::vector<double> quota(terms);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < terms; ++i) {
      quota[i] = wsum > 0 ? dec.terms[i].weight / wsum * rest : 0.0;
      alloc[i] = (reserve ? 1 : 0) + static_cast<std::size_t>(quota[i]);
      assigned += alloc[i];
    }
    std::vector<std::size_t> order(terms);
    for (std::size_t i = 0; i < terms; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double fa = quota[a] - std::floor(quota[a]);
      double fb = quota[b] - std::floor(quota[b]);
      return fa > fb;
    });
    for (std::size_t i = 0; assigned < total_slices; ++i) {
      alloc[order[i % terms]] += 1;
      ++assigned;
    }
    while (assigned > total_slices) {  // only when reserve forced overshoot
      for (std::size_t i = terms; i > 0 && assigned > total_slices; --i) {
        if (alloc[order[i - 1]] > 1) {
          alloc[order[i - 1]] -= 1;
          --assigned;
        }
      }
      break;
    }
  }

  OpticalSchedule sched(n, 0);
  for (std::size_t t = 0; t < terms; ++t) {
    // One circuit per unordered support pair: out side uses port 0, in side
    // port 1, so 3-cycles and longer stay port-exclusive.
    std::vector<Circuit> circuits;
    std::set<std::pair<NodeId, NodeId>> seen;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = dec.terms[t].perm[i];
      if (i == j) continue;
      NodeId lo = static_cast<NodeId>(std::min(i, j));
      NodeId hi = static_cast<NodeId>(std::max(i, j));
      if (!seen.insert({lo, hi}).second) continue;
      circuits.emplace_back(static_cast<NodeId>(i), 0, static_cast<NodeId>(j), 1);
    }
    for (std::size_t rep = 0; rep < alloc[t]; ++rep) {
      SliceId s = static_cast<SliceId>(sched.slices.size());
      sched.slices.emplace_back();
      for (Circuit c : circuits) {
        c.ts = s;
        sched.slices[s].push_back(c);
      }
    }
  }
  if (sched.slices.empty()) sched.slices.resize(total_slices);
  return sched;
}

// --- Deployment ------------------------------------------------------------

FabricTable FabricTable::compile(const OpticalSchedule& schedule) {
  FabricTable t;
  t.wildcard_ = schedule.static_topology;
  t.slices_ = schedule.cycle_length();
  t.nodes_ = schedule.node_count;
  std::size_t max_port = 0;
  for (const auto& slice : schedule.slices)
    for (const Circuit& c : slice)
      max_port = std::max({max_port, static_cast<std::size_t>(c.port1),
                           static_cast<std::size_t>(c.port2)});
  t.ports_ = max_port + 1;
  t.lut_.assign(t.slices_ * t.nodes_ * t.ports_, 0);

  for (SliceId s = 0; s < t.slices_; ++s) {
    std::map<std::pair<NodeId, PortId>, Circuit> used;
    for (const Circuit& c : schedule.slices[s]) {
      for (auto [node, port, peer, pport] :
           {std::tuple{c.n1, c.port1, c.n2, c.port2},
            std::tuple{c.n2, c.port2, c.n1, c.port1}}) {
        auto [it, inserted] = used.emplace(std::pair{node, port}, c);
        if (!inserted) {
          const Circuit& other = it->second;
          std::ostringstream os;
          os << "slice " << s << ": node " << node << " port " << port
             << " used by circuits " << other.n1 << "-" << other.n2 << " and "
             << c.n1 << "-" << c.n2;
          throw InfeasibleTopologyError(os.str());
        }
        std::size_t idx = (static_cast<std::size_t>(s) * t.nodes_ + node) *
                              t.ports_ +
                          port;
        t.lut_[idx] = ((static_cast<std::uint64_t>(peer) << 32) | pport) + 1;
      }
    }
  }
  return t;
}

std::optional<std::pair<NodeId, PortId>> FabricTable::peer(SliceId slice,
                                                           NodeId node,
                                                           PortId port) const {
  if (wildcard_) slice = 0;
  if (slice >= slices_ || node >= nodes_ || port >= ports_) return std::nullopt;
  std::uint64_t e =
      lut_[(static_cast<std::size_t>(slice) * nodes_ + node) * ports_ + port];
  if (e == 0) return std::nullopt;
  e -= 1;
  return std::pair{static_cast<NodeId>(e >> 32),
                   static_cast<PortId>(e & 0xffffffffu)};
}

std::optional<PortId> FabricTable::port_toward(SliceId slice, NodeId node,
                                               NodeId target) const {
  if (wildcard_) slice = 0;
  if (slice >= slices_ || node >= nodes_) return std::nullopt;
  for (PortId p = 0; p < ports_; ++p) {
    auto pr = peer(slice, node, p);
    if (pr && pr->first == target) return p;
  }
  return std::nullopt;
}

FabricTable deploy_topo(const OpticalSchedule& schedule) {
  return FabricTable::compile(schedule);
}

FabricTable deploy_topo(const std::vector<Circuit>& circuits,
                        std::size_t node_count) {
  return FabricTable::compile(OpticalSchedule::single(node_count, circuits));
}

}  // namespace optonet
