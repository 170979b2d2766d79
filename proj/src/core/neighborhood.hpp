#pragma once

#include <optional>
#include <vector>

#include "core/dataset.hpp"

namespace cdd {

struct RankedNeighbor {
    RecordId id = -1;
    double distance = 0.0;
    int rank = 0; // 1-based, consecutive within one query
};

struct KSet {
    RecordId center = -1;
    int k = 0;
    std::optional<double> max_distance;
    std::vector<RankedNeighbor> members; // at most k, distances non-decreasing
};

// Euclidean over numeric covariates plus a 0/1 mismatch term per categorical
// covariate; group and decision never contribute. Requires a normalized
// dataset so every term lies in [0,1].
double distance(const Dataset& ds, RecordId r, RecordId s);

// All other records ordered by (distance, id) ascending; ranks 1..n-1.
std::vector<RankedNeighbor> rank_neighbors(const Dataset& ds, RecordId r);

// Neighbors with rank <= k and, when m is given, distance <= m. The
// distance cap trims a suffix, so ranks stay 1..k'.
KSet kset(const Dataset& ds, RecordId r, int k, std::optional<double> m = std::nullopt);

} // namespace cdd
