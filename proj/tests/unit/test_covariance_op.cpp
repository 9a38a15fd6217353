#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spdescore/covariance_op.hpp"
#include "spdescore/errors.hpp"
#include "spdescore/rng.hpp"

using namespace spdescore;

TEST_CASE("power-law covariance") {
    SUBCASE("diagonal and trace by direct summation") {
        const TraceClassQ q = make_power_law_q(3, 1.0, 2.0);
        CHECK(q.q()(0, 0) == doctest::Approx(1.0));
        CHECK(q.q()(1, 1) == doctest::Approx(0.25));
        CHECK(q.q()(2, 2) == doctest::Approx(1.0 / 9.0));
        double direct = 0.0;
        for (int k = 1; k <= 3; ++k) direct += std::pow(static_cast<double>(k), -2.0);
        CHECK(q.trace() == doctest::Approx(direct).epsilon(1e-15));
        CHECK(q.trace() == doctest::Approx(1.3611111111111112).epsilon(1e-12));
    }

    SUBCASE("single mode") {
        const TraceClassQ q = make_power_law_q(1, 5.0, 2.0);
        CHECK(q.q()(0, 0) == 5.0);
        CHECK(q.sqrt_q()(0, 0) == doctest::Approx(std::sqrt(5.0)));
    }

    SUBCASE("decay bound enforced") {
        CHECK_THROWS_AS(make_power_law_q(2, 1.0, 1.0), TraceClassError);
        CHECK_THROWS_AS(make_power_law_q(2, -1.0, 2.0), InvalidParameterError);
    }
}

TEST_CASE("dense covariance") {
    SUBCASE("identity root") {
        const TraceClassQ q = make_dense_q(Eigen::MatrixXd::Identity(2, 2));
        CHECK((q.sqrt_q() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("symmetric root squares back (eigenvalues 1 and 3)") {
        Eigen::MatrixXd m(2, 2);
        m << 2.0, 1.0, 1.0, 2.0;
        const TraceClassQ q = make_dense_q(m);
        const Eigen::MatrixXd square = q.sqrt_q() * q.sqrt_q();
        CHECK((square - m).norm() / m.norm() <= 1e-10);
        // Closed-form root from mu = (1, 3) on the (1,1)/(1,-1) eigenvectors.
        const double s3 = std::sqrt(3.0);
        CHECK(q.sqrt_q()(0, 0) == doctest::Approx((s3 + 1.0) / 2.0).epsilon(1e-12));
        CHECK(q.sqrt_q()(0, 1) == doctest::Approx((s3 - 1.0) / 2.0).epsilon(1e-12));
    }

    SUBCASE("indefinite matrix rejected") {
        Eigen::MatrixXd m(2, 2);
        m << 1.0, 2.0, 2.0, 1.0;  // eigenvalues -1 and 3
        CHECK_THROWS_AS(make_dense_q(m), NotPsdError);
    }

    SUBCASE("asymmetry rejected") {
        Eigen::MatrixXd m(2, 2);
        m << 1.0, 0.5, 0.2, 1.0;
        CHECK_THROWS_AS(make_dense_q(m), NotSymmetricError);
    }
}

TEST_CASE("sqrt idempotence over random PSD draws") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 8);
        Eigen::MatrixXd b(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) b(i, j) = std::normal_distribution<double>()(gen);
        const Eigen::MatrixXd psd = b * b.transpose();
        const TraceClassQ q = make_dense_q(psd);
        const double rel = (q.sqrt_q() * q.sqrt_q() - psd).norm() / psd.norm();
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("hs condition value") {
    SUBCASE("single negative mode vs quadrature") {
        const ModeSpectrum spec{Eigen::VectorXd::Constant(1, -1.0)};
        const TraceClassQ q = make_power_law_q(1, 1.0, 2.0);
        const double direct =
            oracles::adaptive_simpson([](double s) { return std::exp(-2.0 * s); }, 0.0, 1.0);
        CHECK(hs_condition_value(spec, q, 1.0) == doctest::Approx(direct).epsilon(1e-13));
        CHECK(hs_condition_value(spec, q, 1.0) == doctest::Approx(0.4323323583816936).epsilon(1e-12));
    }

    SUBCASE("lambda = 0 gives q t") {
        const ModeSpectrum spec{Eigen::VectorXd::Zero(1)};
        const TraceClassQ q = make_power_law_q(1, 3.0, 2.0);
        CHECK(hs_condition_value(spec, q, 2.0) == doctest::Approx(6.0).epsilon(1e-15));
    }

    SUBCASE("zero covariance gives zero") {
        const ModeSpectrum spec = make_dirichlet_laplacian(2, 1.0, 1.0);
        const TraceClassQ q = make_dense_q(Eigen::MatrixXd::Zero(2, 2));
        CHECK(hs_condition_value(spec, q, 1.5) == 0.0);
    }
}

TEST_CASE("stochastic convolution covariance vs adaptive Simpson") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 5);
        Eigen::VectorXd lambdas(n);
        for (int k = 1; k <= n; ++k)
            lambdas[k - 1] = -std::uniform_real_distribution<double>(0.1, 2.0)(gen) * k * k;
        const ModeSpectrum spec{lambdas};
        Eigen::MatrixXd b(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) b(i, j) = std::normal_distribution<double>()(gen);
        const TraceClassQ q = make_dense_q(b * b.transpose());
        const double t = std::uniform_real_distribution<double>(0.1, 1.5)(gen);

        const Eigen::MatrixXd closed = stochastic_convolution_covariance(spec, q, t);
        const Eigen::MatrixXd quad = oracles::adaptive_simpson_matrix(
            [&](double s) -> Eigen::MatrixXd {
                const Eigen::ArrayXd decay = spec.decay(s);
                return decay.matrix().asDiagonal() * q.q() * decay.matrix().asDiagonal();
            },
            0.0, t);
        const double scale = std::max(quad.cwiseAbs().maxCoeff(), 1e-300);
        CHECK((closed - quad).cwiseAbs().maxCoeff() / scale <= 1e-12);
    }
}
