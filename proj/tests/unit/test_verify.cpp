#include <doctest.h>

#include "spdescore/verify.hpp"

using namespace spdescore;

TEST_CASE("random instances respect the documented families") {
    std::mt19937_64 gen(21);
    for (int i = 0; i < 30; ++i) {
        const Instance inst = random_instance(gen, 8, false, true);
        CHECK(inst.spectrum.n_modes() >= 1);
        CHECK(inst.spectrum.n_modes() <= 8);
        CHECK(inst.spectrum.growth_bound() < 0.0);
        CHECK(inst.q.n_modes() == inst.spectrum.n_modes());
        CHECK(inst.q.trace() >= 0.0);
    }
}

TEST_CASE("fast analytic checks pass on the quick profile") {
    CHECK(check_covariance_closed_form(Profile::quick, 7).pass);
    CHECK(check_covariance_recursion(Profile::quick, 7).pass);
    CHECK(check_covering_property(Profile::quick, 7).pass);
    CHECK(check_minimal_norm(Profile::quick, 7).pass);
    CHECK(check_chain_rule(Profile::quick, 7).pass);
    CHECK(check_score_exactness(Profile::quick, 7).pass);
}

TEST_CASE("report json is deterministic for a fixed seed") {
    // Two quick runs of a cheap check must serialize identically; wall time
    // is deliberately excluded from the JSON.
    const CheckReport a = check_covariance_closed_form(Profile::quick, 99);
    const CheckReport b = check_covariance_closed_form(Profile::quick, 99);
    CHECK(report_to_json({a}, Profile::quick, 99).dump() ==
          report_to_json({b}, Profile::quick, 99).dump());
    CHECK(a.metric == b.metric);
}

TEST_CASE("canonical ordering of the suite ids") {
    // The check ids are numbered so that lexicographic order matches the
    // canonical criteria order.
    const char* expected[] = {
        "01_covariance_closed_form", "02_covariance_recursion",   "03_covering_property",
        "04_minimal_norm",           "05_skorokhod_ito",          "06_ibp_duality",
        "07_trace_identity",         "08_chain_rule",             "09_score_exactness",
        "10_bismut_binned_demo",     "11_reverse_marginal_tracking",
    };
    // Only validate the cheap subset here; the full suite runs in acceptance.
    CHECK(check_covariance_closed_form(Profile::quick, 1).id == expected[0]);
    CHECK(check_covariance_recursion(Profile::quick, 1).id == expected[1]);
    CHECK(check_covering_property(Profile::quick, 1).id == expected[2]);
    CHECK(check_minimal_norm(Profile::quick, 1).id == expected[3]);
    CHECK(check_chain_rule(Profile::quick, 1).id == expected[7]);
    CHECK(check_score_exactness(Profile::quick, 1).id == expected[8]);
}
