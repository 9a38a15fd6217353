#include <doctest.h>

#include <cmath>

#include "spdescore/errors.hpp"
#include "spdescore/spectrum.hpp"
#include "spdescore/state.hpp"

using namespace spdescore;

TEST_CASE("grid synthesis") {
    const ModeSpectrum spec1 = make_dirichlet_laplacian(1, 1.0, 1.0);
    const ModeSpectrum spec2 = make_dirichlet_laplacian(2, 1.0, 1.0);

    SUBCASE("zero coefficients give the zero function") {
        const GridFunction g = synthesize_on_grid(spec2.zero_state(), 7, 1.0);
        CHECK(g.value.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("single mode at the midpoint") {
        // n_points = 3 puts x = L/2 on the interior grid.
        const GridFunction g = synthesize_on_grid(spec1.state({1.0}), 3, 1.0);
        CHECK(g.x[1] == doctest::Approx(0.5));
        CHECK(g.value[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    }

    SUBCASE("two modes equal the direct sine sum") {
        const HilbertState state = spec2.state({1.0, 1.0});
        const GridFunction g = synthesize_on_grid(state, 9, 1.0);
        for (int j = 0; j < 9; ++j) {
            const double x = g.x[j];
            const double direct = std::sqrt(2.0) * (std::sin(M_PI * x) + std::sin(2.0 * M_PI * x));
            CHECK(g.value[j] == doctest::Approx(direct).epsilon(1e-13));
        }
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(synthesize_on_grid(spec1.state({1.0}), 1, 1.0), InvalidParameterError);
        CHECK_THROWS_AS(synthesize_on_grid(spec1.state({1.0}), 5, 0.0), InvalidParameterError);
    }
}

TEST_CASE("state validation") {
    const ModeSpectrum spec = make_dirichlet_laplacian(2, 1.0, 1.0);
    CHECK_THROWS_AS(spec.state({1.0}), DimensionError);
    Eigen::VectorXd bad(2);
    bad << 1.0, std::nan("");
    CHECK_THROWS_AS(spec.state(bad), InvalidParameterError);
    CHECK(spec.state({3.0, 4.0}).norm() == doctest::Approx(5.0));
}
