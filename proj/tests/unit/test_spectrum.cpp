#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spdescore/errors.hpp"
#include "spdescore/rng.hpp"
#include "spdescore/spectrum.hpp"

using namespace spdescore;

TEST_CASE("dirichlet laplacian eigenvalues") {
    const ModeSpectrum one = make_dirichlet_laplacian(1, 1.0, 1.0);
    CHECK(one.lambdas()[0] == doctest::Approx(-M_PI * M_PI).epsilon(1e-14));

    const ModeSpectrum three = make_dirichlet_laplacian(3, 1.0, 1.0);
    CHECK(three.lambdas()[0] == doctest::Approx(-M_PI * M_PI).epsilon(1e-14));
    CHECK(three.lambdas()[1] == doctest::Approx(-4.0 * M_PI * M_PI).epsilon(1e-14));
    CHECK(three.lambdas()[2] == doctest::Approx(-9.0 * M_PI * M_PI).epsilon(1e-14));

    // L = pi makes k pi / L = k.
    const ModeSpectrum scaled = make_dirichlet_laplacian(2, M_PI, 2.0);
    CHECK(scaled.lambdas()[0] == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(scaled.lambdas()[1] == doctest::Approx(-8.0).epsilon(1e-14));

    CHECK(scaled.growth_bound() == doctest::Approx(-2.0));
    CHECK(scaled.stability_constant() == 1.0);

    CHECK_THROWS_AS(make_dirichlet_laplacian(0, 1.0, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(make_dirichlet_laplacian(2, -1.0, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(make_dirichlet_laplacian(2, 1.0, 0.0), InvalidParameterError);
}

TEST_CASE("semigroup action") {
    const ModeSpectrum spec{Eigen::VectorXd::Constant(1, -1.0)};

    SUBCASE("t = 0 is the identity") {
        const HilbertState v = spec.state({3.25});
        CHECK(semigroup_apply(spec, 0.0, v).coeffs()[0] == 3.25);
    }

    SUBCASE("scalar exponential") {
        const HilbertState v = spec.state({2.0});
        CHECK(semigroup_apply(spec, 1.0, v).coeffs()[0] ==
              doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));
    }

    SUBCASE("group composition S(-t) S(t) = I") {
        const HilbertState v = spec.state({1.7});
        const HilbertState fwd = semigroup_apply(spec, 1.0, v);
        const HilbertState back = semigroup_apply(spec, -1.0, fwd, /*allow_group=*/true);
        CHECK(back.coeffs()[0] == doctest::Approx(1.7).epsilon(1e-14));
    }

    SUBCASE("negative time needs the group flag") {
        CHECK_THROWS_AS(semigroup_apply(spec, -0.5, spec.state({1.0})), InvalidParameterError);
    }

    SUBCASE("basis mismatch is a dimension error") {
        const ModeSpectrum other{Eigen::VectorXd::Constant(1, -2.0)};
        CHECK_THROWS_AS(semigroup_apply(spec, 1.0, other.state({1.0})), DimensionError);
    }
}

TEST_CASE("semigroup law and contraction over random draws") {
    std::mt19937_64 gen(91);
    std::uniform_real_distribution<double> time_draw(0.0, 2.0);
    const ModeSpectrum spec = make_dirichlet_laplacian(6, 1.3, 0.7);

    for (int i = 0; i < 100; ++i) {
        const double t = time_draw(gen);
        const double s = time_draw(gen);
        const HilbertState v = spec.state(normal_vector(gen, 6));
        const HilbertState joint = semigroup_apply(spec, t + s, v);
        const HilbertState chained = semigroup_apply(spec, t, semigroup_apply(spec, s, v));
        const double err = (joint.coeffs() - chained.coeffs()).norm() /
                           std::max(joint.coeffs().norm(), 1e-300);
        CHECK(err <= 1e-12);

        // omega < 0 here, so S(t) is a contraction.
        CHECK(semigroup_apply(spec, t, v).norm() <= v.norm() * (1.0 + 1e-14));
    }
}

TEST_CASE("integrated exponential") {
    CHECK(integrated_exp(0.0, 2.5) == 2.5);
    CHECK(integrated_exp(-2.0, 1.0) == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-15));
    // Tiny |mu t| stays on the series branch and matches the quadrature oracle.
    const double mu = 1e-12;
    const double direct = oracles::adaptive_simpson([&](double s) { return std::exp(mu * s); }, 0.0, 3.0);
    CHECK(integrated_exp(mu, 3.0) == doctest::Approx(direct).epsilon(1e-13));
}
