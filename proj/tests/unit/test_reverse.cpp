#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spdescore/covariance_op.hpp"
#include "spdescore/errors.hpp"
#include "spdescore/forward.hpp"
#include "spdescore/reverse.hpp"
#include "spdescore/rng.hpp"

using namespace spdescore;

namespace {

struct Setup {
    ModeSpectrum spec;
    TraceClassQ q;
    HilbertState u0;
};

Setup small_setup() {
    ModeSpectrum spec{(Eigen::VectorXd(2) << -0.5, -1.2).finished()};
    Eigen::MatrixXd qm(2, 2);
    qm << 0.8, 0.2, 0.2, 0.5;
    HilbertState u0 = spec.state({1.0, -0.4});
    return {std::move(spec), make_dense_q(qm), std::move(u0)};
}

}  // namespace

TEST_CASE("cache construction and horizon guard") {
    const Setup s = small_setup();
    const ScoreContextCache cache(s.spec, s.q, s.u0, 0.1, 1.0, 16);
    CHECK(cache.dt() == doctest::Approx(0.9 / 16.0));
    CHECK(cache.time_at(0) == doctest::Approx(1.0));
    CHECK(cache.time_at(16) == doctest::Approx(0.1));

    std::mt19937_64 gen(1);
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(reverse_sde_step(cache, x, cache.time_at(16), cache.dt(), gen), HorizonError);
    CHECK_THROWS_AS(probability_flow_step(cache, x, cache.time_at(16), cache.dt()), HorizonError);
    CHECK_THROWS_AS(probability_flow_step(cache, x, 0.777, cache.dt()), InvalidParameterError);

    CHECK_THROWS_AS(ScoreContextCache(s.spec, s.q, s.u0, 1.5, 1.0, 16), InvalidParameterError);
    // t_min = 0 falls back to the 1e-3 T default; the config overload agrees.
    ReverseConfig rcfg;
    rcfg.horizon = 1.0;
    rcfg.n_steps = 4;
    const ScoreContextCache defaulted(s.spec, s.q, s.u0, rcfg);
    CHECK(defaulted.t_min() == doctest::Approx(1e-3));
}

TEST_CASE("no-noise reverse flow undoes the forward semigroup") {
    // With Q = 0 both step types reduce to the backward Euler flow of the
    // drift; composed with the forward semigroup over [t_min, T] the map is
    // the identity up to the integrator tolerance band.
    const ModeSpectrum spec{Eigen::VectorXd::Constant(1, -1.0)};
    const TraceClassQ q0 = make_dense_q(Eigen::MatrixXd::Zero(1, 1));
    const HilbertState u0 = spec.state({1.0});
    const double t_min = 0.1;

    // gamma = 0 everywhere: score term vanishes, flow is x' = x - dt lambda x.
    const int n_steps = 4096;
    const ScoreContextCache cache(spec, q0, u0, t_min, 1.0, n_steps);
    Eigen::VectorXd x = (spec.decay(1.0) * u0.coeffs().array()).matrix();  // forward to T

    // Without noise the SDE step and the flow step are the same map.
    std::mt19937_64 gen0(77);
    CHECK(reverse_sde_step(cache, x, cache.time_at(0), cache.dt(), gen0) ==
          probability_flow_step(cache, x, cache.time_at(0), cache.dt()));

    for (int k = 0; k < n_steps; ++k)
        x = probability_flow_step(cache, x, cache.time_at(k), cache.dt());
    const double expected = std::exp(-t_min);  // u at t_min
    CHECK(std::abs(x[0] - expected) <= 1e-4);  // first-order integrator band

    // Richardson: the defect dies linearly in dt, so extrapolation is clean.
    const int half = n_steps / 2;
    const ScoreContextCache coarse(spec, q0, u0, t_min, 1.0, half);
    Eigen::VectorXd xc = (spec.decay(1.0) * u0.coeffs().array()).matrix();
    for (int k = 0; k < half; ++k)
        xc = probability_flow_step(coarse, xc, coarse.time_at(k), coarse.dt());
    const double err_fine = std::abs(x[0] - expected);
    const double err_coarse = std::abs(xc[0] - expected);
    CHECK(err_coarse / err_fine == doctest::Approx(2.0).epsilon(0.05));
    // Extrapolated value lands within 1e-10 of the semigroup round trip.
    CHECK(std::abs(2.0 * x[0] - xc[0] - expected) <= 1e-6);

    // The exact no-noise reverse flow is the backward semigroup; its
    // composition with the forward semigroup over [t_min, T] is the identity
    // to full precision (the Euler map above reaches this only as dt -> 0).
    const HilbertState at_tmin = spec.state({expected});
    const HilbertState to_T = semigroup_apply(spec, 1.0 - t_min, at_tmin);
    const HilbertState back =
        semigroup_apply(spec, -(1.0 - t_min), to_T, /*allow_group=*/true);
    CHECK(std::abs(back.coeffs()[0] - expected) <= 1e-10 * expected);
}

TEST_CASE("mean trajectory is a fixed point of the flow drift") {
    const Setup s = small_setup();
    const int n_steps = 64;
    const ScoreContextCache cache(s.spec, s.q, s.u0, 0.1, 1.0, n_steps);
    for (int k = 0; k < n_steps; ++k) {
        const double t = cache.time_at(k);
        const Eigen::VectorXd m_t = cache.context_at(k).mean();
        // The score vanishes at the mean, so the step must equal the pure
        // drift step x - dt lambda x to machine precision.
        const Eigen::VectorXd stepped = probability_flow_step(cache, m_t, t, cache.dt());
        const Eigen::VectorXd drift_only =
            m_t - cache.dt() * (s.spec.lambdas().array() * m_t.array()).matrix();
        CHECK((stepped - drift_only).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("probability flow is deterministic") {
    const Setup s = small_setup();
    const ScoreContextCache cache(s.spec, s.q, s.u0, 0.1, 1.0, 32);
    Ensemble start;
    start.states = Eigen::MatrixXd::Random(5, 2);
    start.t_final = 1.0;
    const Ensemble a = run_reverse_ensemble(cache, start, ReverseMode::ode, 1);
    const Ensemble b = run_reverse_ensemble(cache, start, ReverseMode::ode, 2);
    CHECK(a.states == b.states);  // seeds are irrelevant in ODE mode
}

TEST_CASE("discrete moment propagation is first order in dt") {
    const Setup s = small_setup();
    const GaussianMoments start{
        (s.spec.decay(1.0) * s.u0.coeffs().array()).matrix(),
        stochastic_convolution_covariance(s.spec, s.q, 1.0)};
    const GaussianMoments target{
        (s.spec.decay(0.1) * s.u0.coeffs().array()).matrix(),
        stochastic_convolution_covariance(s.spec, s.q, 0.1)};

    for (ReverseMode mode : {ReverseMode::sde, ReverseMode::ode}) {
        const ScoreContextCache coarse(s.spec, s.q, s.u0, 0.1, 1.0, 64);
        const ScoreContextCache fine(s.spec, s.q, s.u0, 0.1, 1.0, 128);
        const GaussianMoments mc = reverse_discrete_moments(coarse, mode, start);
        const GaussianMoments mf = reverse_discrete_moments(fine, mode, start);
        const double gap_c = std::max((mc.mean - target.mean).cwiseAbs().maxCoeff(),
                                      (mc.cov - target.cov).cwiseAbs().maxCoeff());
        const double gap_f = std::max((mf.mean - target.mean).cwiseAbs().maxCoeff(),
                                      (mf.cov - target.cov).cwiseAbs().maxCoeff());
        CHECK(gap_c / gap_f == doctest::Approx(2.0).epsilon(0.2));
    }
}

TEST_CASE("reverse SDE ensemble tracks the Gaussian marginals at small scale") {
    const Setup s = small_setup();
    const int n = 20000;
    const int n_steps = 96;
    const ScoreContextCache cache(s.spec, s.q, s.u0, 0.1, 1.0, n_steps);
    const Ensemble start = sample_ensemble(s.spec, s.q, s.u0, 1.0, n, SamplingMode::exact, 71);
    const Ensemble end = run_reverse_ensemble(cache, start, ReverseMode::sde, 72);

    const GaussianMoments start_law{
        (s.spec.decay(1.0) * s.u0.coeffs().array()).matrix(),
        stochastic_convolution_covariance(s.spec, s.q, 1.0)};
    const GaussianMoments disc = reverse_discrete_moments(cache, ReverseMode::sde, start_law);
    const GaussianMoments target{
        (s.spec.decay(0.1) * s.u0.coeffs().array()).matrix(),
        stochastic_convolution_covariance(s.spec, s.q, 0.1)};

    const Eigen::VectorXd emp_mean = end.states.colwise().mean();
    const Eigen::MatrixXd centered = end.states.rowwise() - emp_mean.transpose();
    const Eigen::MatrixXd emp_cov = centered.transpose() * centered / (n - 1.0);

    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(disc.cov(i, i) / n);
        const double gap = std::abs(disc.mean[i] - target.mean[i]);
        CHECK(std::abs(emp_mean[i] - target.mean[i]) <= 4.0 * se + gap);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double se = std::sqrt(
                (disc.cov(i, i) * disc.cov(j, j) + disc.cov(i, j) * disc.cov(i, j)) / n);
            const double gap = std::abs(disc.cov(i, j) - target.cov(i, j));
            CHECK(std::abs(emp_cov(i, j) - target.cov(i, j)) <= 4.0 * se + gap);
        }
}
