#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "spdescore/forward.hpp"
#include "spdescore/score.hpp"

namespace spdescore {

enum class ReverseMode { sde, ode };

struct ReverseConfig {
    double t_min = 0.0;  // 0 picks the default 1e-3 * horizon
    double horizon = 1.0;
    int n_steps = 128;
    ReverseMode mode = ReverseMode::sde;
    std::uint64_t seed = 0;
};

/// Score contexts on the uniform reverse grid t_k = T - k dt, k = 0..n_steps,
/// shared read-only across samples. gamma(t) degenerates as t -> 0, so the
/// grid stops at t_min > 0.
class ScoreContextCache {
public:
    ScoreContextCache(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                      double t_min, double horizon, int n_steps, double pinv_threshold = 1e-12);

    ScoreContextCache(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                      const ReverseConfig& config, double pinv_threshold = 1e-12)
        : ScoreContextCache(spec, q, u0, config.t_min, config.horizon, config.n_steps,
                            pinv_threshold) {}

    const ModeSpectrum& spectrum() const { return spec_; }
    const TraceClassQ& q() const { return q_; }
    double t_min() const { return t_min_; }
    double horizon() const { return horizon_; }
    int n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double time_at(int k) const { return horizon_ - k * dt_; }

    const ScoreContext& context_at(int k) const { return contexts_.at(k); }

    /// Context at grid time t (throws if t is not a grid node).
    const ScoreContext& context_at_time(double t) const;

private:
    ModeSpectrum spec_;
    TraceClassQ q_;
    double t_min_;
    double horizon_;
    int n_steps_;
    double dt_;
    std::vector<ScoreContext> contexts_;
};

/// One Euler-Maruyama step of the reverse-time SDE from t to t - dt:
/// state - dt [lambda state - Q s_t(state)] + sqrt(dt) Q^{1/2} xi.
Eigen::VectorXd reverse_sde_step(const ScoreContextCache& cache, const Eigen::VectorXd& state,
                                 double t, double dt, std::mt19937_64& gen);

/// Deterministic probability-flow step with half-strength score drift:
/// state - dt [lambda state - Q s_t(state) / 2].
Eigen::VectorXd probability_flow_step(const ScoreContextCache& cache, const Eigen::VectorXd& state,
                                      double t, double dt);

/// Push a start ensemble (at t = horizon) down the full grid to t_min.
/// Sample i uses stream i of `seed`; the ODE mode ignores the streams.
Ensemble run_reverse_ensemble(const ScoreContextCache& cache, const Ensemble& start,
                              ReverseMode mode, std::uint64_t seed);

struct GaussianMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Exact mean/covariance propagation of the affine reverse update: the law of
/// the discrete sampler started from a Gaussian, free of Monte Carlo error.
/// Used to separate discretization bias from sampling noise.
GaussianMoments reverse_discrete_moments(const ScoreContextCache& cache, ReverseMode mode,
                                         const GaussianMoments& start);

}  // namespace spdescore
