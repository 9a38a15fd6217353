#include "spdescore/reverse.hpp"

#include <cmath>

#include "spdescore/errors.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

namespace {

double grid_tolerance(double horizon) { return 1e-9 * std::max(1.0, horizon); }

Eigen::VectorXd score_at(const ScoreContext& ctx, const Eigen::VectorXd& state) {
    return -ctx.covariance().apply_pinv(state - ctx.mean());
}

}  // namespace

ScoreContextCache::ScoreContextCache(const ModeSpectrum& spec, const TraceClassQ& q,
                                     const HilbertState& u0, double t_min, double horizon,
                                     int n_steps, double pinv_threshold)
    : spec_(spec), q_(q), t_min_(t_min), horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0)) throw InvalidParameterError("horizon must be positive");
    if (t_min_ == 0.0) t_min_ = 1e-3 * horizon;
    if (!(t_min_ > 0.0 && t_min_ < horizon))
        throw InvalidParameterError("t_min must satisfy 0 < t_min < horizon");
    if (n_steps < 1) throw InvalidParameterError("n_steps must be >= 1");

    dt_ = (horizon - t_min_) / n_steps;
    contexts_.reserve(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k)
        contexts_.emplace_back(spec_, q_, u0, horizon - k * dt_, pinv_threshold);
}

const ScoreContext& ScoreContextCache::context_at_time(double t) const {
    const double pos = (horizon_ - t) / dt_;
    const auto k = static_cast<long>(std::llround(pos));
    if (k < 0 || k > n_steps_ ||
        std::abs(time_at(static_cast<int>(k)) - t) > grid_tolerance(horizon_))
        throw InvalidParameterError("time is not a node of the reverse grid");
    return contexts_[static_cast<std::size_t>(k)];
}

Eigen::VectorXd reverse_sde_step(const ScoreContextCache& cache, const Eigen::VectorXd& state,
                                 double t, double dt, std::mt19937_64& gen) {
    if (t - dt < cache.t_min() - grid_tolerance(cache.horizon()))
        throw HorizonError("reverse step would cross below t_min");
    const ScoreContext& ctx = cache.context_at_time(t);
    const Eigen::VectorXd s = score_at(ctx, state);
    const Eigen::VectorXd drift =
        (cache.spectrum().lambdas().array() * state.array()).matrix() - cache.q().q() * s;
    return state - dt * drift +
           std::sqrt(dt) * (cache.q().sqrt_q() * normal_vector(gen, state.size()));
}

Eigen::VectorXd probability_flow_step(const ScoreContextCache& cache, const Eigen::VectorXd& state,
                                      double t, double dt) {
    if (t - dt < cache.t_min() - grid_tolerance(cache.horizon()))
        throw HorizonError("reverse step would cross below t_min");
    const ScoreContext& ctx = cache.context_at_time(t);
    const Eigen::VectorXd s = score_at(ctx, state);
    const Eigen::VectorXd drift =
        (cache.spectrum().lambdas().array() * state.array()).matrix() - 0.5 * cache.q().q() * s;
    return state - dt * drift;
}

Ensemble run_reverse_ensemble(const ScoreContextCache& cache, const Ensemble& start,
                              ReverseMode mode, std::uint64_t seed) {
    if (start.states.cols() != cache.spectrum().n_modes())
        throw DimensionError("start ensemble does not match the spectrum");
    if (std::abs(start.t_final - cache.horizon()) > grid_tolerance(cache.horizon()))
        throw InvalidParameterError("start ensemble is not at the cache horizon");

    const int n_steps = cache.n_steps();
    const double dt = cache.dt();
    Ensemble out;
    out.t_final = cache.t_min();
    out.seed = seed;
    out.config_hash = start.config_hash;
    out.states.resizeLike(start.states);

    parallel_for_chunks(
        static_cast<std::size_t>(start.n_samples()), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                std::mt19937_64 gen = make_stream(seed, i);
                Eigen::VectorXd state = start.states.row(static_cast<Eigen::Index>(i));
                for (int k = 0; k < n_steps; ++k) {
                    const double t = cache.time_at(k);
                    state = (mode == ReverseMode::sde)
                                ? reverse_sde_step(cache, state, t, dt, gen)
                                : probability_flow_step(cache, state, t, dt);
                }
                out.states.row(static_cast<Eigen::Index>(i)) = state;
            }
        });
    return out;
}

GaussianMoments reverse_discrete_moments(const ScoreContextCache& cache, ReverseMode mode,
                                         const GaussianMoments& start) {
    const Eigen::Index n = cache.spectrum().n_modes();
    if (start.mean.size() != n || start.cov.rows() != n || start.cov.cols() != n)
        throw DimensionError("start moments do not match the spectrum");

    const double dt = cache.dt();
    const double score_weight = (mode == ReverseMode::sde) ? 1.0 : 0.5;
    const Eigen::MatrixXd lambda_diag = cache.spectrum().lambdas().asDiagonal();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

    GaussianMoments acc = start;
    for (int k = 0; k < cache.n_steps(); ++k) {
        const ScoreContext& ctx = cache.context_at(k);
        // The update is affine in x: with s(x) = -pinv (x - m(t)), the drift
        // lambda x - w Q s(x) gives x' = [I - dt (Lambda + w Q pinv)] x
        //                               + dt w Q pinv m(t) (+ noise).
        const Eigen::MatrixXd score_gain = score_weight * cache.q().q() * ctx.covariance().pinv();
        const Eigen::MatrixXd step = identity - dt * (lambda_diag + score_gain);
        acc.mean = step * acc.mean + dt * score_gain * ctx.mean();
        acc.cov = step * acc.cov * step.transpose();
        if (mode == ReverseMode::sde) acc.cov += dt * cache.q().q();
    }
    return acc;
}

}  // namespace spdescore
