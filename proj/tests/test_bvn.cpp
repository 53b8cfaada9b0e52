#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "optonet/topo.hpp"

using namespace optonet;
using optonet::testing::TestRng;

namespace {

double reconstruction_error(const BvnDecomposition& dec) {
  const std::size_t n = dec.normalized.size();
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
  for (const BvnTerm& t : dec.terms)
    for (std::size_t i = 0; i < n; ++i) sum[i][t.perm[i]] += t.weight;
  double err = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      err = std::max(err, std::abs(sum[i][j] - dec.normalized[i][j]));
  return err;
}

bool doubly_stochastic(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0, c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (m[i][j] < -1e-15) return false;
      r += m[i][j];
      c += m[j][i];
    }
    if (std::abs(r - 1) > 1e-9 || std::abs(c - 1) > 1e-9) return false;
  }
  return true;
}

bool all_permutations(const BvnDecomposition& dec) {
  for (const BvnTerm& t : dec.terms) {
    std::vector<char> seen(t.perm.size(), 0);
    for (std::size_t c : t.perm) {
      if (c >= t.perm.size() || seen[c]) return false;
      seen[c] = 1;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("two-node demand reduces to the swap permutation") {
  TrafficMatrix tm(2);
  tm.set(0, 1, 2);
  tm.set(1, 0, 2);
  auto sched = bvn_schedule(tm, 2);
  REQUIRE(sched.cycle_length() == 2);
  for (const auto& slice : sched.slices) {
    REQUIRE(slice.size() == 1);
    CHECK(slice[0].n1 == 0);
    CHECK(slice[0].n2 == 1);
  }
}

TEST_CASE("three-node mixture reconstructs exactly") {
  TrafficMatrix tm(3);
  tm.set(0, 1, 6);
  tm.set(1, 2, 6);
  tm.set(2, 0, 6);
  tm.set(0, 2, 2);
  tm.set(1, 0, 2);
  tm.set(2, 1, 2);
  auto dec = bvn_decompose(tm);
  CHECK(doubly_stochastic(dec.normalized));
  CHECK(all_permutations(dec));
  CHECK(reconstruction_error(dec) < 1e-9);
}

TEST_CASE("random 6x6 matrices stay within the permutation bound") {
  TestRng rng(41);
  for (int iter = 0; iter < 50; ++iter) {
    TrafficMatrix tm(6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i != j) tm.set(i, j, 1.0 + static_cast<double>(rng.below(5000)));
    auto dec = bvn_decompose(tm);
    CHECK(doubly_stochastic(dec.normalized));
    CHECK(all_permutations(dec));
    CHECK(dec.terms.size() <= 6 * 6 - 2 * 6 + 2);
    CHECK(reconstruction_error(dec) < 1e-9);
  }
}

TEST_CASE("slice quantization is proportional and never starves a term") {
  TrafficMatrix tm(4);
  // Two dominant rings and a weak one.
  tm.set(0, 1, 900);
  tm.set(1, 0, 900);
  tm.set(2, 3, 900);
  tm.set(3, 2, 900);
  tm.set(0, 2, 30);
  tm.set(2, 0, 30);
  tm.set(1, 3, 30);
  tm.set(3, 1, 30);
  auto dec = bvn_decompose(tm);
  std::size_t terms = dec.terms.size();
  REQUIRE(terms >= 2);
  auto sched = bvn_schedule(tm, 12);
  CHECK(sched.cycle_length() == 12);
  sched.validate();

  // Count distinct slice contents; every term keeps at least one slice.
  std::set<std::vector<Circuit>> distinct;
  for (auto slice : sched.slices) {
    for (Circuit& c : slice) c.ts.reset();
    std::sort(slice.begin(), slice.end());
    distinct.insert(slice);
  }
  CHECK(distinct.size() == terms);
}

TEST_CASE("permutation slices are port-exclusive even for odd cycles") {
  TrafficMatrix tm(3);
  // Pure 3-cycle demand: 0->1->2->0.
  tm.set(0, 1, 10);
  tm.set(1, 2, 10);
  tm.set(2, 0, 10);
  auto sched = bvn_schedule(tm, 3);
  sched.validate();
  bool found_cycle_slice = false;
  for (const auto& slice : sched.slices)
    if (slice.size() == 3) found_cycle_slice = true;
  CHECK(found_cycle_slice);
}

TEST_CASE("zero demand still yields a schedule") {
  TrafficMatrix tm(4);
  auto sched = bvn_schedule(tm, 4);
  CHECK(sched.cycle_length() == 4);
  sched.validate();
}

TEST_CASE("fewer slices than terms keep only the heaviest permutations") {
  // Exactly 0.7 of one rotation and 0.3 of the reverse one.
  TrafficMatrix tm(3);
  tm.set(0, 1, 7);
  tm.set(1, 2, 7);
  tm.set(2, 0, 7);
  tm.set(0, 2, 3);
  tm.set(1, 0, 3);
  tm.set(2, 1, 3);
  auto dec = bvn_decompose(tm);
  REQUIRE(dec.terms.size() == 2);
  const BvnTerm& heavy =
      dec.terms[0].weight >= dec.terms[1].weight ? dec.terms[0] : dec.terms[1];
  CHECK(heavy.weight == doctest::Approx(0.7));

  auto sched = bvn_schedule(tm, 1);
  REQUIRE(sched.cycle_length() == 1);
  std::set<std::pair<NodeId, NodeId>> got;
  for (const Circuit& c : sched.slices[0]) got.insert({c.n1, c.n2});
  std::set<std::pair<NodeId, NodeId>> want;
  for (std::size_t i = 0; i < 3; ++i) {
    NodeId a = static_cast<NodeId>(std::min(i, heavy.perm[i]));
    NodeId b = static_cast<NodeId>(std::max(i, heavy.perm[i]));
    want.insert({a, b});
  }
  CHECK(got == want);
}
