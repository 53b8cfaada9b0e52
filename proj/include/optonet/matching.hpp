#pragma once

#include <tuple>
#include <vector>

#include "optonet/types.hpp"

namespace optonet {

// Maximum-weight matching on a general graph (blossom algorithm, primal-dual
// with dual variables on vertices and blossoms). Returns mate[v] = matched
// peer or -1. With max_cardinality set, the result is a maximum-cardinality
// matching of maximum weight, which on a complete even graph is the
// max-weight perfect matching.
std::vector<int> max_weight_matching(
    int n, const std::vector<std::tuple<int, int, double>>& edges,
    bool max_cardinality);

// Max-weight perfect matching over the complete graph with edge weight
// tm[i][j] + tm[j][i]; output circuits use uplink 0 on both ends. Ties are
// broken deterministically by the ascending (i, j) edge enumeration order.
std::vector<Circuit> edmonds_matching(const TrafficMatrix& tm);

}  // namespace optonet
