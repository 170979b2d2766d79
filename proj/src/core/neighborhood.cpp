#include "core/neighborhood.hpp"

#include <algorithm>
#include <cmath>

namespace cdd {
namespace {

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "neighborhood"); }

void check_query(const Dataset& ds, RecordId r) {
    if (!ds.is_normalized()) fail("distance requires a normalized dataset");
    if (r < 0 || static_cast<std::size_t>(r) >= ds.size())
        fail("record id " + std::to_string(r) + " out of range");
}

struct Candidate {
    double distance;
    RecordId id;
    bool operator<(const Candidate& o) const {
        if (distance != o.distance) return distance < o.distance;
        return id < o.id;
    }
};

std::vector<Candidate> all_candidates(const Dataset& ds, RecordId r) {
    std::vector<Candidate> out;
    out.reserve(ds.size() - 1);
    const auto ri = static_cast<std::size_t>(r);
    for (std::size_t s = 0; s < ds.size(); ++s) {
        if (s == ri) continue;
        out.push_back(Candidate{distance(ds, r, static_cast<RecordId>(s)), static_cast<RecordId>(s)});
    }
    return out;
}

} // namespace

double distance(const Dataset& ds, RecordId r, RecordId s) {
    check_query(ds, r);
    check_query(ds, s);
    const auto ri = static_cast<std::size_t>(r);
    const auto si = static_cast<std::size_t>(s);
    double sum = 0.0;
    for (const int ci : ds.covariate_columns()) {
        const Column& c = ds.columns()[static_cast<std::size_t>(ci)];
        if (c.is_numeric()) {
            const double d = c.values[ri] - c.values[si];
            sum += d * d;
        } else if (c.codes[ri] != c.codes[si]) {
            sum += 1.0;
        }
    }
    return std::sqrt(sum);
}

std::vector<RankedNeighbor> rank_neighbors(const Dataset& ds, RecordId r) {
    check_query(ds, r);
    auto cand = all_candidates(ds, r);
    std::sort(cand.begin(), cand.end());
    std::vector<RankedNeighbor> out;
    out.reserve(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i)
        out.push_back(RankedNeighbor{cand[i].id, cand[i].distance, static_cast<int>(i + 1)});
    return out;
}

KSet kset(const Dataset& ds, RecordId r, int k, std::optional<double> m) {
    if (k < 1) fail("k must be at least 1");
    if (m && !(*m > 0.0)) fail("max distance must be positive");
    check_query(ds, r);

    auto cand = all_candidates(ds, r);
    const std::size_t take = std::min(cand.size(), static_cast<std::size_t>(k));
    // the (distance, id) order is total, so a partial sort of the first k
    // equals the brute-force full sort prefix
    if (take < cand.size())
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    else
        std::sort(cand.begin(), cand.end());

    KSet out;
    out.center = r;
    out.k = k;
    out.max_distance = m;
    for (std::size_t i = 0; i < take; ++i) {
        if (m && cand[i].distance > *m) break;
        out.members.push_back(RankedNeighbor{cand[i].id, cand[i].distance, static_cast<int>(i + 1)});
    }
    return out;
}

} // namespace cdd
