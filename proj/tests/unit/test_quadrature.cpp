#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spdescore/quadrature.hpp"

using namespace spdescore;

TEST_CASE("gauss-legendre weights sum to the interval measure") {
    for (int n : {4, 16, 64}) {
        const GaussLegendre& rule = gauss_legendre(n);
        CHECK(rule.weights.sum() == doctest::Approx(2.0).epsilon(1e-13));
        CHECK(rule.nodes.minCoeff() > -1.0);
        CHECK(rule.nodes.maxCoeff() < 1.0);
    }
}

TEST_CASE("polynomial exactness") {
    // An n-point rule integrates degree 2n-1 exactly.
    const double got = gl_integrate_scalar([](double x) { return x * x * x * x * x * x; },
                                           -1.0, 1.0, 4);
    CHECK(got == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("doubling matches the independent Simpson oracle") {
    auto f = [](double s) { return std::exp(-3.0 * s) * std::sin(2.0 * s); };
    const double gl = gl_integrate_scalar_to_tolerance(f, 0.0, 2.0);
    const double simpson = oracles::adaptive_simpson(f, 0.0, 2.0);
    CHECK(gl == doctest::Approx(simpson).epsilon(1e-12));
}

TEST_CASE("vector-valued integration") {
    auto f = [](double s) -> Eigen::VectorXd {
        Eigen::VectorXd v(2);
        v << std::exp(-s), s * s;
        return v;
    };
    const Eigen::VectorXd got = gl_integrate_to_tolerance(f, 0.0, 1.0);
    CHECK(got[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-13));
    CHECK(got[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}
