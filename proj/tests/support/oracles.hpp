#pragma once

#include <array>
#include <optional>
#include <vector>

#include "core/dataset.hpp"
#include "core/neighborhood.hpp"

namespace testsupport {

// Mixed Euclidean/mismatch metric recomputed straight from the columns.
double naive_distance(const cdd::Dataset& ds, cdd::RecordId r, cdd::RecordId s);

struct NaiveNeighbor {
    cdd::RecordId id = -1;
    double distance = 0.0;
    int rank = 0;
};

// Full-sort brute force: order every other record by (distance, id), rank
// 1.., keep rank <= k and distance <= m.
std::vector<NaiveNeighbor> naive_kset(const cdd::Dataset& ds, cdd::RecordId center, int k,
                                      std::optional<double> m);

// Direct-summation weighted negative rate over the kset's unprotected
// members; absent when the weight sum is zero.
std::optional<double> naive_p2c(const cdd::KSet& ks, const cdd::Dataset& ds,
                                const std::vector<double>& weights);

// Information gain in bits from explicit joint counts; joint[cell] =
// {count with target 0, count with target 1}.
double naive_ig(const std::vector<std::array<long long, 2>>& joint);

// Mean and sum of squared deviations, two-pass.
struct LabelStats {
    long long n = 0;
    double mean = 0.0;
    double sse = 0.0;
};
LabelStats label_stats(const std::vector<double>& labels);

// Exhaustive scan of the CART candidate space on the subset: numeric
// midpoints between consecutive distinct raw values (value < t goes left),
// categorical one-level-vs-rest (value == level goes left), both children
// >= min_leaf. Reports the lowest achievable child SSE sum.
struct NaiveSplitResult {
    bool found = false;
    double best_after_sse = 0.0;
};
NaiveSplitResult naive_best_split(const cdd::Dataset& ds, const std::vector<cdd::RecordId>& ids,
                                  const std::vector<double>& labels, int min_leaf);

double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

} // namespace testsupport
