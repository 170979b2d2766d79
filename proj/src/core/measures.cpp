#include "core/measures.hpp"

namespace cdd {
namespace {

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "measures"); }

double p2_fallback(const BaseRates& rates, FallbackMode mode) {
    return mode == FallbackMode::PaperLiteral ? rates.p_positive : rates.p_negative;
}

} // namespace

double protected_negative_rate(const ContingencyTable& t, const BaseRates& rates) {
    if (t.n1() == 0) return rates.p_negative;
    return static_cast<double>(t.a) / static_cast<double>(t.n1());
}

ContingencyTable contingency(const KSet& ks, const Dataset& ds) {
    ContingencyTable t;
    for (const auto& nb : ks.members) {
        if (nb.id < 0 || static_cast<std::size_t>(nb.id) >= ds.size())
            fail("kset member id " + std::to_string(nb.id) + " out of range");
        const bool neg = ds.decision(nb.id) == Decision::Negative;
        if (ds.group(nb.id) == Group::Protected)
            neg ? ++t.a : ++t.b;
        else
            neg ? ++t.c : ++t.d;
    }
    return t;
}

double risk_difference(const ContingencyTable& t, const BaseRates& rates, FallbackMode mode) {
    const double p1 = protected_negative_rate(t, rates);
    const double p2 = t.n2() == 0 ? p2_fallback(rates, mode)
                                  : static_cast<double>(t.c) / static_cast<double>(t.n2());
    return p1 - p2;
}

CausalNegativeRate causal_negative_rate(const KSet& ks, const Dataset& ds,
                                        std::span<const double> weights, const BaseRates& rates,
                                        FallbackMode mode) {
    if (weights.size() < ds.size()) fail("weight vector shorter than the dataset");
    CausalNegativeRate out;
    for (const auto& nb : ks.members) {
        if (ds.group(nb.id) != Group::Unprotected) continue;
        const double w = weights[static_cast<std::size_t>(nb.id)];
        if (!(w >= 0.0)) fail("negative weight for record " + std::to_string(nb.id));
        out.rate.weighted_total += w;
        if (ds.decision(nb.id) == Decision::Negative) out.rate.weighted_negative += w;
    }
    if (out.rate.weighted_total > 0.0) {
        out.p2c = out.rate.weighted_negative / out.rate.weighted_total;
    } else {
        // clipping keeps every weight positive, so this is the empty-S case;
        // reuse the n2 = 0 substitution
        out.p2c = p2_fallback(rates, mode);
        out.fallback_used = true;
    }
    return out;
}

double causal_risk_difference(const KSet& ks, const Dataset& ds, std::span<const double> weights,
                              const BaseRates& rates, FallbackMode mode) {
    const ContingencyTable t = contingency(ks, ds);
    const CausalNegativeRate cnr = causal_negative_rate(ks, ds, weights, rates, mode);
    return protected_negative_rate(t, rates) - cnr.p2c;
}

} // namespace cdd
