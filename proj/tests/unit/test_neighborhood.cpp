#include <doctest.h>

#include <cmath>
#include <random>

#include "core/neighborhood.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using cdd::Dataset;
using cdd::kset;
using cdd::rank_neighbors;
using testsupport::load_csv;
using testsupport::xgd_spec;

namespace {

Dataset mixed_fixture() {
    // two numeric covariates (already spanning [0,1]) and one categorical
    cdd::DatasetSpec spec;
    spec.attributes = {
        {"a", cdd::AttrKind::Numeric, cdd::AttrRole::Covariate},
        {"b", cdd::AttrKind::Numeric, cdd::AttrRole::Covariate},
        {"c", cdd::AttrKind::Categorical, cdd::AttrRole::Covariate},
        {"grp", cdd::AttrKind::Categorical, cdd::AttrRole::Covariate},
        {"dec", cdd::AttrKind::Categorical, cdd::AttrRole::Covariate},
    };
    spec.group_attribute = "grp";
    spec.protected_value = "P";
    spec.decision_attribute = "dec";
    spec.positive.tokens = {"pos"};
    return cdd::normalize_numeric(load_csv("a,b,c,grp,dec\n"
                                           "0,0,red,P,neg\n"
                                           "0.3,0,red,U,pos\n"
                                           "0,0,blue,P,pos\n"
                                           "1,1,red,U,neg\n",
                                           spec));
}

} // namespace

TEST_CASE("distance on the mixed metric") {
    const Dataset ds = mixed_fixture();
    SUBCASE("identity") { CHECK(cdd::distance(ds, 0, 0) == 0.0); }
    SUBCASE("single numeric difference") {
        CHECK(cdd::distance(ds, 0, 1) == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("single categorical mismatch") {
        CHECK(cdd::distance(ds, 0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("numeric and categorical terms combine in quadrature") {
        // record 1 vs 2: numeric diff 0.3, categorical mismatch
        CHECK(cdd::distance(ds, 1, 2) == doctest::Approx(std::sqrt(0.09 + 1.0)).epsilon(1e-12));
    }
    SUBCASE("group and decision never contribute") {
        // records 0 and 2 differ in group, decision and color only
        CHECK(cdd::distance(ds, 0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("requires a normalized dataset") {
        const Dataset raw = load_csv("x,grp,dec\n1,P,neg\n5,U,pos\n", xgd_spec());
        CHECK_THROWS_WITH_AS(cdd::distance(raw, 0, 1), doctest::Contains("normalize"), cdd::Error);
    }
    SUBCASE("symmetry is exact") {
        for (cdd::RecordId r = 0; r < 4; ++r)
            for (cdd::RecordId s = 0; s < 4; ++s)
                CHECK(cdd::distance(ds, r, s) == cdd::distance(ds, s, r));
    }
}

TEST_CASE("rank_neighbors orders by distance then id") {
    SUBCASE("one-dimensional points") {
        const Dataset ds = cdd::normalize_numeric(
            load_csv("x,grp,dec\n0,P,neg\n0.1,U,pos\n0.9,P,pos\n1,U,neg\n", xgd_spec()));
        const auto ranked = rank_neighbors(ds, 0);
        REQUIRE(ranked.size() == 3);
        CHECK(ranked[0].id == 1);
        CHECK(ranked[0].rank == 1);
        CHECK(ranked[0].distance == doctest::Approx(0.1));
        CHECK(ranked[1].id == 2);
        CHECK(ranked[1].rank == 2);
        CHECK(ranked[2].id == 3);
    }
    SUBCASE("equal distances break ties on the lower id") {
        const Dataset ds = cdd::normalize_numeric(
            load_csv("x,grp,dec\n0.5,P,neg\n1,U,pos\n0,P,pos\n0.75,U,neg\n", xgd_spec()));
        const auto ranked = rank_neighbors(ds, 0);
        REQUIRE(ranked.size() == 3);
        CHECK(ranked[0].id == 3); // 0.25 away
        // ids 1 and 2 are both 0.5 away; the lower id wins
        CHECK(ranked[1].id == 1);
        CHECK(ranked[2].id == 2);
        CHECK(ranked[1].distance == ranked[2].distance);
    }
    SUBCASE("the query never ranks itself") {
        const Dataset ds = mixed_fixture();
        for (const auto& rn : rank_neighbors(ds, 2)) CHECK(rn.id != 2);
    }
    SUBCASE("repeated calls are identical") {
        const Dataset ds = mixed_fixture();
        const auto once = rank_neighbors(ds, 1);
        const auto again = rank_neighbors(ds, 1);
        REQUIRE(once.size() == again.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(once[i].id == again[i].id);
            CHECK(once[i].rank == again[i].rank);
        }
    }
}

TEST_CASE("kset membership") {
    const Dataset ds = cdd::normalize_numeric(load_csv("x,grp,dec\n"
                                                       "0.5,P,neg\n"
                                                       "0.52,U,pos\n"
                                                       "0.6,P,pos\n"
                                                       "0.7,U,neg\n"
                                                       "1,U,pos\n"
                                                       "0,P,neg\n",
                                                       xgd_spec()));
    SUBCASE("k at least n-1 returns every other record") {
        const auto ks = kset(ds, 0, 100);
        CHECK(ks.members.size() == ds.size() - 1);
    }
    SUBCASE("k caps the member count") {
        const auto ks = kset(ds, 0, 3);
        REQUIRE(ks.members.size() == 3);
        CHECK(ks.members[0].id == 1);
        CHECK(ks.members[1].id == 2);
        CHECK(ks.members[2].id == 3);
        for (std::size_t i = 0; i < ks.members.size(); ++i)
            CHECK(ks.members[i].rank == static_cast<int>(i) + 1);
    }
    SUBCASE("a tight distance cap keeps only the nearest neighbor") {
        // second-nearest of record 0 sits 0.1 away
        const auto ks = kset(ds, 0, 3, 0.05);
        REQUIRE(ks.members.size() == 1);
        CHECK(ks.members[0].id == 1);
        CHECK(ks.members[0].rank == 1);
    }
    SUBCASE("members never exceed the cap distance") {
        const auto ks = kset(ds, 0, 5, 0.21);
        for (const auto& member : ks.members) CHECK(member.distance <= 0.21);
        CHECK(ks.members.size() == 3);
    }
    SUBCASE("invalid parameters are rejected") {
        CHECK_THROWS_AS(kset(ds, 0, 0), cdd::Error);
        CHECK_THROWS_AS(kset(ds, 0, 3, 0.0), cdd::Error);
        CHECK_THROWS_AS(kset(ds, 0, 3, -1.0), cdd::Error);
        CHECK_THROWS_AS(kset(ds, 99, 3), cdd::Error);
    }
}

TEST_CASE("kset equals the brute-force oracle on random data") {
    const Dataset ds = cdd::normalize_numeric(
        load_csv(testsupport::random_mixed_csv(60, 2, 2, 11), testsupport::random_mixed_spec(2, 2)));
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> pick_center(0, 59);
    std::uniform_int_distribution<int> pick_k(1, 59);
    std::uniform_real_distribution<double> pick_m(0.1, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const cdd::RecordId center = pick_center(rng);
        const int k = pick_k(rng);
        std::optional<double> m;
        if (trial % 2 == 1) m = pick_m(rng);
        const auto got = kset(ds, center, k, m);
        const auto want = testsupport::naive_kset(ds, center, k, m);
        REQUIRE(got.members.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got.members[i].id == want[i].id);
            CHECK(got.members[i].rank == want[i].rank);
            CHECK(got.members[i].distance == doctest::Approx(want[i].distance).epsilon(1e-12));
        }
    }
}

TEST_CASE("triangle inequality holds on random triples") {
    const Dataset ds = cdd::normalize_numeric(
        load_csv(testsupport::random_mixed_csv(40, 3, 1, 21), testsupport::random_mixed_spec(3, 1)));
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> pick(0, 39);
    for (int trial = 0; trial < 200; ++trial) {
        const cdd::RecordId a = pick(rng), b = pick(rng), c = pick(rng);
        CHECK(cdd::distance(ds, a, c) <=
              cdd::distance(ds, a, b) + cdd::distance(ds, b, c) + 1e-9);
    }
}
