#pragma once

#include <span>

#include "core/dataset.hpp"
#include "core/neighborhood.hpp"

namespace cdd {

struct ContingencyTable {
    long long a = 0; // protected, negative
    long long b = 0; // protected, positive
    long long c = 0; // unprotected, negative
    long long d = 0; // unprotected, positive

    long long n1() const { return a + b; }
    long long n2() const { return c + d; }
};

// Substitution for proportions over an empty group. PaperLiteral replaces an
// undefined p1 with the dataset negative rate and an undefined p2 with the
// positive rate; ExpectedNegative uses the negative rate for both.
enum class FallbackMode { PaperLiteral, ExpectedNegative };

struct WeightedGroupRate {
    double weighted_negative = 0.0; // sum of weights over unprotected negative members
    double weighted_total = 0.0;    // sum of weights over all unprotected members
};

struct CausalNegativeRate {
    WeightedGroupRate rate;
    double p2c = 0.0;
    bool fallback_used = false; // no unprotected members; p2c came from the base rate
};

// Group-by-decision counts over the kset members (the center is excluded by
// construction).
ContingencyTable contingency(const KSet& ks, const Dataset& ds);

// p1 = a/n1 with its n1 = 0 substitution; shared by RD and RD^c.
double protected_negative_rate(const ContingencyTable& t, const BaseRates& rates);

// p1 = a/n1, p2 = c/n2, with base-rate substitution when a group is empty.
double risk_difference(const ContingencyTable& t, const BaseRates& rates,
                       FallbackMode mode = FallbackMode::PaperLiteral);

// p2^c = sum of weights over negative unprotected members / sum over all
// unprotected members. `weights` is indexed by record id and must cover the
// whole dataset.
CausalNegativeRate causal_negative_rate(const KSet& ks, const Dataset& ds,
                                        std::span<const double> weights, const BaseRates& rates,
                                        FallbackMode mode = FallbackMode::PaperLiteral);

// RD^c = p1 - p2^c, sharing the p1 fallback with risk_difference.
double causal_risk_difference(const KSet& ks, const Dataset& ds, std::span<const double> weights,
                              const BaseRates& rates, FallbackMode mode = FallbackMode::PaperLiteral);

} // namespace cdd
