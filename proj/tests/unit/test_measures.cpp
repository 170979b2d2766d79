#include <doctest.h>

#include <random>

#include "core/measures.hpp"
#include "core/neighborhood.hpp"
#include "core/propensity.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using cdd::BaseRates;
using cdd::CausalNegativeRate;
using cdd::ContingencyTable;
using cdd::Dataset;
using cdd::FallbackMode;
using cdd::KSet;
using testsupport::load_csv;
using testsupport::worked_example;
using testsupport::xgd_spec;

namespace {

// weights[id] for the whole dataset, default weight 1
std::vector<double> weights_for(const Dataset& ds, double base = 1.0) {
    return std::vector<double>(ds.size(), base);
}

} // namespace

TEST_CASE("contingency tallies the engineered neighborhood") {
    const auto ex = worked_example();
    const KSet ks = cdd::kset(ex.ds, ex.center, 15);
    REQUIRE(ks.members.size() == 15);
    const ContingencyTable t = cdd::contingency(ks, ex.ds);
    CHECK(t.a == 4);
    CHECK(t.b == 3);
    CHECK(t.c == 3);
    CHECK(t.d == 5);
    CHECK(t.n1() == 7);
    CHECK(t.n2() == 8);
}

TEST_CASE("contingency on small fixtures") {
    SUBCASE("empty kset") {
        const auto ex = worked_example();
        KSet empty;
        empty.center = ex.center;
        empty.k = 3;
        const ContingencyTable t = cdd::contingency(empty, ex.ds);
        CHECK((t.a == 0 && t.b == 0 && t.c == 0 && t.d == 0));
    }
    SUBCASE("three members tallied by hand") {
        const Dataset ds = load_csv("x,grp,dec\n"
                                    "0,P,pos\n" // center, not counted
                                    "0.1,P,neg\n"
                                    "0.2,P,neg\n"
                                    "0.3,U,pos\n",
                                    xgd_spec());
        KSet ks;
        ks.center = 0;
        ks.k = 3;
        ks.members = {{1, 0.1, 1}, {2, 0.2, 2}, {3, 0.3, 3}};
        const ContingencyTable t = cdd::contingency(ks, ds);
        CHECK(t.a == 2);
        CHECK(t.b == 0);
        CHECK(t.c == 0);
        CHECK(t.d == 1);
    }
    SUBCASE("member ids are validated") {
        const auto ex = worked_example();
        KSet bad;
        bad.center = 0;
        bad.k = 1;
        bad.members = {{999, 0.1, 1}};
        CHECK_THROWS_AS(cdd::contingency(bad, ex.ds), cdd::Error);
    }
}

TEST_CASE("risk_difference with fallbacks") {
    const BaseRates rates{0.4, 0.6};
    SUBCASE("plain proportions") {
        const ContingencyTable t{4, 3, 3, 5};
        CHECK(cdd::risk_difference(t, rates) ==
              doctest::Approx(4.0 / 7.0 - 3.0 / 8.0).epsilon(1e-12));
    }
    SUBCASE("empty protected side substitutes the negative base rate") {
        const ContingencyTable t{0, 0, 1, 1};
        CHECK(cdd::risk_difference(t, rates) == 0.4 - 0.5);
        CHECK(cdd::risk_difference(t, rates, FallbackMode::ExpectedNegative) == 0.4 - 0.5);
    }
    SUBCASE("empty unprotected side follows the configured mode") {
        const ContingencyTable t{1, 1, 0, 0};
        CHECK(cdd::risk_difference(t, rates, FallbackMode::PaperLiteral) == 0.5 - 0.6);
        CHECK(cdd::risk_difference(t, rates, FallbackMode::ExpectedNegative) == 0.5 - 0.4);
    }
    SUBCASE("extremes stay inside [-1, 1]") {
        CHECK(cdd::risk_difference(ContingencyTable{2, 0, 0, 3}, rates) == 1.0);
        CHECK(cdd::risk_difference(ContingencyTable{0, 2, 3, 0}, rates) == -1.0);
    }
}

TEST_CASE("causal_negative_rate on the engineered neighborhood") {
    const auto ex = worked_example();
    const KSet ks = cdd::kset(ex.ds, ex.center, 15);
    const BaseRates rates = cdd::base_rates(ex.ds);

    SUBCASE("uniform weights collapse to the plain proportion") {
        const auto weights = weights_for(ex.ds);
        const CausalNegativeRate r = cdd::causal_negative_rate(ks, ex.ds, weights, rates);
        CHECK(r.p2c == 3.0 / 8.0);
        CHECK_FALSE(r.fallback_used);
        CHECK(r.rate.weighted_negative == 3.0);
        CHECK(r.rate.weighted_total == 8.0);
        CHECK(cdd::causal_risk_difference(ks, ex.ds, weights, rates) ==
              cdd::risk_difference(cdd::contingency(ks, ex.ds), rates));
    }
    SUBCASE("positive-unprotected members weighted 4") {
        auto weights = weights_for(ex.ds);
        for (const auto id : ex.unprotected_positive) weights[static_cast<std::size_t>(id)] = 4.0;
        const CausalNegativeRate r = cdd::causal_negative_rate(ks, ex.ds, weights, rates);
        CHECK(r.p2c == doctest::Approx(3.0 / 23.0).epsilon(1e-12));
        CHECK(cdd::causal_risk_difference(ks, ex.ds, weights, rates) ==
              doctest::Approx(4.0 / 7.0 - 3.0 / 23.0).epsilon(1e-12));
    }
    SUBCASE("positive-unprotected members at weight zero push the rate to one") {
        auto weights = weights_for(ex.ds);
        for (const auto id : ex.unprotected_positive) weights[static_cast<std::size_t>(id)] = 0.0;
        const CausalNegativeRate r = cdd::causal_negative_rate(ks, ex.ds, weights, rates);
        CHECK(r.p2c == 1.0);
        CHECK(cdd::causal_risk_difference(ks, ex.ds, weights, rates) ==
              doctest::Approx(4.0 / 7.0 - 1.0).epsilon(1e-12));
    }
}

TEST_CASE("causal fallback mirrors the empty-unprotected rule") {
    const Dataset ds = load_csv("x,grp,dec\n"
                                "0,P,neg\n0.1,P,neg\n0.2,P,pos\n0.3,U,neg\n0.4,U,pos\n",
                                xgd_spec());
    const BaseRates rates = cdd::base_rates(ds); // p_neg = 3/5, p_pos = 2/5
    KSet ks;
    ks.center = 0;
    ks.k = 2;
    ks.members = {{1, 0.1, 1}, {2, 0.2, 2}}; // protected members only
    const auto weights = weights_for(ds);

    SUBCASE("no unprotected member") {
        const CausalNegativeRate lit =
            cdd::causal_negative_rate(ks, ds, weights, rates, FallbackMode::PaperLiteral);
        CHECK(lit.fallback_used);
        CHECK(lit.p2c == rates.p_positive);
        const CausalNegativeRate neg =
            cdd::causal_negative_rate(ks, ds, weights, rates, FallbackMode::ExpectedNegative);
        CHECK(neg.p2c == rates.p_negative);
    }
    SUBCASE("zero total weight over unprotected members") {
        KSet with_u = ks;
        with_u.members.push_back({3, 0.3, 3});
        std::vector<double> zeroed = weights;
        zeroed[3] = 0.0;
        const CausalNegativeRate r = cdd::causal_negative_rate(with_u, ds, zeroed, rates);
        CHECK(r.fallback_used);
        CHECK(r.p2c == rates.p_positive);
    }
    SUBCASE("weights shorter than the dataset are rejected") {
        const std::vector<double> narrow(2, 1.0);
        CHECK_THROWS_AS(cdd::causal_negative_rate(ks, ds, narrow, rates), cdd::Error);
    }
    SUBCASE("negative weights are rejected") {
        std::vector<double> bad = weights;
        bad[3] = -0.5;
        KSet with_u = ks;
        with_u.members.push_back({3, 0.3, 3});
        CHECK_THROWS_AS(cdd::causal_negative_rate(with_u, ds, bad, rates), cdd::Error);
    }
}

TEST_CASE("weight-scale invariance and direction") {
    const Dataset ds = cdd::normalize_numeric(
        load_csv(testsupport::random_mixed_csv(120, 2, 1, 31), testsupport::random_mixed_spec(2, 1)));
    const BaseRates rates = cdd::base_rates(ds);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> w_dist(0.05, 2.0);
    std::uniform_int_distribution<int> pick(0, 119);

    SUBCASE("multiplying every weight by a constant leaves RD^c unchanged") {
        for (int trial = 0; trial < 40; ++trial) {
            const KSet ks = cdd::kset(ds, pick(rng), 20);
            std::vector<double> weights(ds.size());
            for (auto& w : weights) w = w_dist(rng);
            const double base = cdd::causal_risk_difference(ks, ds, weights, rates);
            for (const double kappa : {1e-6, 1.0, 1e6}) {
                std::vector<double> scaled = weights;
                for (auto& w : scaled) w *= kappa;
                const double got = cdd::causal_risk_difference(ks, ds, scaled, rates);
                CHECK(std::abs(got - base) < 1e-12);
            }
        }
    }
    SUBCASE("raising a positive member's weight raises RD^c") {
        for (int trial = 0; trial < 20; ++trial) {
            const KSet ks = cdd::kset(ds, pick(rng), 20);
            cdd::RecordId positive_member = -1;
            for (const auto& m : ks.members)
                if (ds.group(m.id) == cdd::Group::Unprotected &&
                    ds.decision(m.id) == cdd::Decision::Positive)
                    positive_member = m.id;
            if (positive_member < 0) continue;
            std::vector<double> weights(ds.size(), 1.0);
            const double before = cdd::causal_risk_difference(ks, ds, weights, rates);
            weights[static_cast<std::size_t>(positive_member)] = 5.0;
            const double after = cdd::causal_risk_difference(ks, ds, weights, rates);
            CHECK(after >= before - 1e-15);
        }
    }
    SUBCASE("matches the direct-summation oracle") {
        for (int trial = 0; trial < 40; ++trial) {
            const KSet ks = cdd::kset(ds, pick(rng), 18);
            std::vector<double> weights(ds.size());
            for (auto& w : weights) w = w_dist(rng);
            const auto want = testsupport::naive_p2c(ks, ds, weights);
            const CausalNegativeRate got = cdd::causal_negative_rate(ks, ds, weights, rates);
            if (want) {
                CHECK_FALSE(got.fallback_used);
                CHECK(got.p2c == doctest::Approx(*want).epsilon(1e-12));
            } else {
                CHECK(got.fallback_used);
            }
        }
    }
    SUBCASE("RD and RD^c stay in [-1, 1]") {
        for (int trial = 0; trial < 40; ++trial) {
            const KSet ks = cdd::kset(ds, pick(rng), 12);
            std::vector<double> weights(ds.size());
            for (auto& w : weights) w = w_dist(rng);
            const double rd = cdd::risk_difference(cdd::contingency(ks, ds), rates);
            const double rdc = cdd::causal_risk_difference(ks, ds, weights, rates);
            CHECK(rd >= -1.0);
            CHECK(rd <= 1.0);
            CHECK(rdc >= -1.0);
            CHECK(rdc <= 1.0);
        }
    }
}
