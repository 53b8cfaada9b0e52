#pragma once

#include "optonet/types.hpp"

namespace optonet::testing {

// Four-node, three-slice demo schedule used across the test suite: node 0
// reaches node 1 in slice 0, node 1 reaches node 3 in slice 1, and node 0
// reaches node 3 directly in slice 2. Ports are wired so the two-hop route
// compiles to source hops <1,0> and <2,1>.
inline OpticalSchedule four_node_demo() {
  OpticalSchedule s(4, 3);
  s.slices[0].emplace_back(0, 1, 1, 0, 0);
  s.slices[1].emplace_back(1, 2, 3, 1, 1);
  s.slices[2].emplace_back(0, 2, 3, 2, 2);
  s.slice_duration_ns = 2000;
  s.guardband_ns = 200;
  return s;
}

// Deterministic small rng for randomized property tests.
struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  double unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }
};

}  // namespace optonet::testing
