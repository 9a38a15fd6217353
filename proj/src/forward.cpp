#include "spdescore/forward.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "spdescore/errors.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

namespace {

void check_pair(const ModeSpectrum& spec, const TraceClassQ& q) {
    if (q.n_modes() != spec.n_modes())
        throw DimensionError("covariance dimension does not match the spectrum");
}

void check_state(const ModeSpectrum& spec, const HilbertState& u) {
    if (u.basis_id() != spec.basis_id() || u.size() != spec.n_modes())
        throw DimensionError("state basis does not match the spectrum");
}

int resolve_step_count(double dt, double horizon) {
    if (!(dt > 0.0)) throw InvalidParameterError("dt must be positive");
    if (!(horizon > 0.0)) throw InvalidParameterError("horizon must be positive");
    const double ratio = horizon / dt;
    const auto m = static_cast<long long>(std::llround(ratio));
    if (m < 1 || std::abs(static_cast<double>(m) * dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw InvalidParameterError("horizon must be an integer multiple of dt");
    return static_cast<int>(m);
}

std::uint64_t hash_doubles(std::uint64_t h, const double* p, std::size_t n) {
    return fnv1a(p, n * sizeof(double), h);
}

}  // namespace

Eigen::MatrixXd transition_covariance(const ModeSpectrum& spec, const TraceClassQ& q, double dt) {
    return stochastic_convolution_covariance(spec, q, dt);
}

ExactTransitionKernel::ExactTransitionKernel(const ModeSpectrum& spec, const TraceClassQ& q,
                                             double dt)
    : dt_(dt) {
    check_pair(spec, q);
    if (!(dt > 0.0)) throw InvalidParameterError("dt must be positive");
    decay_ = spec.decay(dt);

    Eigen::MatrixXd gamma = transition_covariance(spec, q, dt);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
    if (es.info() != Eigen::Success)
        throw NotPsdError("eigendecomposition of the transition covariance failed");
    Eigen::VectorXd mu = es.eigenvalues();
    const double clamp = -1e-12 * std::max(mu.maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu[i] < clamp)
            throw NotPsdError("transition covariance is not PSD; Q is inconsistent");
        if (mu[i] < 0.0) mu[i] = 0.0;
    }
    noise_factor_ = es.eigenvectors() * mu.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd ExactTransitionKernel::step(const Eigen::VectorXd& u, std::mt19937_64& gen) const {
    return (decay_ * u.array()).matrix() + noise_factor_ * normal_vector(gen, u.size());
}

HilbertState sample_exact_transition(const ModeSpectrum& spec, const TraceClassQ& q,
                                     const HilbertState& u, double dt, std::mt19937_64& gen) {
    check_state(spec, u);
    ExactTransitionKernel kernel(spec, q, dt);
    return HilbertState(kernel.step(u.coeffs(), gen), spec.basis_id());
}

PathRecord simulate_em_path(const ModeSpectrum& spec, const TraceClassQ& q,
                            const HilbertState& u0, double dt, double horizon,
                            std::uint64_t seed) {
    check_pair(spec, q);
    check_state(spec, u0);
    const int m_steps = resolve_step_count(dt, horizon);
    const Eigen::Index n = spec.n_modes();
    const double sqrt_dt = std::sqrt(dt);

    PathRecord path;
    path.seed = seed;
    path.stability_warning = dt * spec.lambdas().cwiseAbs().maxCoeff() > 2.0;
    path.times.resize(m_steps + 1);
    path.increments.resize(m_steps, n);
    path.states.resize(m_steps + 1, n);
    path.states.row(0) = u0.coeffs();

    std::mt19937_64 gen = make_stream(seed, 0);
    Eigen::VectorXd state = u0.coeffs();
    for (int m = 0; m < m_steps; ++m) {
        path.times[m] = dt * m;
        const Eigen::VectorXd dw = sqrt_dt * normal_vector(gen, n);
        path.increments.row(m) = dw;
        state += dt * (spec.lambdas().array() * state.array()).matrix() + q.sqrt_q() * dw;
        path.states.row(m + 1) = state;
    }
    path.times[m_steps] = dt * m_steps;
    return path;
}

Eigen::VectorXd em_terminal_from_increments(const ModeSpectrum& spec, const TraceClassQ& q,
                                            const Eigen::VectorXd& u0, double dt,
                                            const Eigen::MatrixXd& increments) {
    check_pair(spec, q);
    if (u0.size() != spec.n_modes() || increments.cols() != spec.n_modes())
        throw DimensionError("increment dimension does not match the spectrum");
    Eigen::VectorXd state = u0;
    for (Eigen::Index m = 0; m < increments.rows(); ++m) {
        state += dt * (spec.lambdas().array() * state.array()).matrix() +
                 q.sqrt_q() * increments.row(m).transpose();
    }
    return state;
}

HilbertState stochastic_convolution(const ModeSpectrum& spec, const TraceClassQ& q,
                                    const PathRecord& path) {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(spec.n_modes());
    return HilbertState(
        mild_terminal_from_increments(spec, q, zero, path.times, path.increments),
        spec.basis_id());
}

Eigen::VectorXd mild_terminal_from_increments(const ModeSpectrum& spec, const TraceClassQ& q,
                                              const Eigen::VectorXd& u0,
                                              const Eigen::VectorXd& times,
                                              const Eigen::MatrixXd& increments) {
    check_pair(spec, q);
    if (u0.size() != spec.n_modes() || increments.cols() != spec.n_modes())
        throw DimensionError("increment dimension does not match the spectrum");
    if (times.size() != increments.rows() + 1)
        throw DimensionError("time grid must have one more entry than the increment rows");

    const double horizon = times[times.size() - 1];
    Eigen::VectorXd acc = (spec.decay(horizon) * u0.array()).matrix();
    for (Eigen::Index m = 0; m < increments.rows(); ++m) {
        const Eigen::VectorXd noise = q.sqrt_q() * increments.row(m).transpose();
        acc += (spec.decay(horizon - times[m]) * noise.array()).matrix();
    }
    return acc;
}

Ensemble sample_ensemble(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                         double horizon, int n_samples, SamplingMode mode, std::uint64_t seed,
                         int em_steps) {
    check_pair(spec, q);
    check_state(spec, u0);
    if (n_samples < 1) throw InvalidParameterError("n_samples must be >= 1");
    if (!(horizon > 0.0)) throw InvalidParameterError("horizon must be positive");
    if (mode == SamplingMode::euler_maruyama && em_steps < 1)
        throw InvalidParameterError("EM sampling needs em_steps >= 1");

    const Eigen::Index n = spec.n_modes();
    Ensemble out;
    out.t_final = horizon;
    out.seed = seed;
    out.states.resize(n_samples, n);

    std::uint64_t h = fnv1a("ensemble");
    h = hash_doubles(h, spec.lambdas().data(), static_cast<std::size_t>(n));
    h = hash_doubles(h, q.q().data(), static_cast<std::size_t>(n * n));
    h = hash_doubles(h, u0.coeffs().data(), static_cast<std::size_t>(n));
    h = hash_doubles(h, &horizon, 1);
    const std::uint64_t mode_tag =
        (mode == SamplingMode::exact) ? 1u : 2u + static_cast<std::uint64_t>(em_steps) * 4u;
    h = fnv1a(&mode_tag, sizeof(mode_tag), h);
    h = fnv1a(&seed, sizeof(seed), h);
    out.config_hash = h;

    if (mode == SamplingMode::exact) {
        ExactTransitionKernel kernel(spec, q, horizon);
        parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                std::mt19937_64 gen = make_stream(seed, i);
                out.states.row(static_cast<Eigen::Index>(i)) = kernel.step(u0.coeffs(), gen);
            }
        });
    } else {
        const double dt = horizon / em_steps;
        const double sqrt_dt = std::sqrt(dt);
        parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                std::mt19937_64 gen = make_stream(seed, i);
                Eigen::VectorXd state = u0.coeffs();
                for (int m = 0; m < em_steps; ++m) {
                    state += dt * (spec.lambdas().array() * state.array()).matrix() +
                             q.sqrt_q() * (sqrt_dt * normal_vector(gen, n));
                }
                out.states.row(static_cast<Eigen::Index>(i)) = state;
            }
        });
    }
    return out;
}

}  // namespace spdescore
