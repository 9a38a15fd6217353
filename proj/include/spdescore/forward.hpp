#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "spdescore/covariance_op.hpp"
#include "spdescore/spectrum.hpp"

namespace spdescore {

/// One simulated trajectory: the time grid, the driving Brownian increments
/// per noise mode, and the state path. Immutable once returned.
struct PathRecord {
    Eigen::VectorXd times;       // t_0 = 0 .. t_M = T, strictly increasing
    Eigen::MatrixXd increments;  // M x N, row m ~ N(0, dt_m I)
    Eigen::MatrixXd states;      // (M+1) x N, row 0 = u0
    std::uint64_t seed = 0;
    bool stability_warning = false;  // dt * max|lambda| > 2

    int n_steps() const { return static_cast<int>(increments.rows()); }
    double horizon() const { return times[times.size() - 1]; }
};

struct Ensemble {
    Eigen::MatrixXd states;  // n_samples x N terminal coefficients
    double t_final = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    Eigen::Index n_samples() const { return states.rows(); }
};

enum class SamplingMode { exact, euler_maruyama };

/// Covariance of the exact Gaussian transition over dt (the accumulated noise
/// covariance of the mild solution).
Eigen::MatrixXd transition_covariance(const ModeSpectrum& spec, const TraceClassQ& q, double dt);

/// Precomputed one-step exact sampler: u |-> S(dt) u + xi with
/// xi ~ N(0, transition_covariance(dt)). The noise factor comes from the
/// symmetric eigendecomposition so rank-deficient Q is fine.
class ExactTransitionKernel {
public:
    ExactTransitionKernel(const ModeSpectrum& spec, const TraceClassQ& q, double dt);

    Eigen::VectorXd step(const Eigen::VectorXd& u, std::mt19937_64& gen) const;
    double dt() const { return dt_; }

private:
    Eigen::ArrayXd decay_;
    Eigen::MatrixXd noise_factor_;
    double dt_;
};

HilbertState sample_exact_transition(const ModeSpectrum& spec, const TraceClassQ& q,
                                     const HilbertState& u, double dt, std::mt19937_64& gen);

/// Euler-Maruyama path over [0, T] with T = M dt. Sets the stability warning
/// instead of failing when dt * max|lambda| > 2 (probing instability is
/// allowed).
PathRecord simulate_em_path(const ModeSpectrum& spec, const TraceClassQ& q,
                            const HilbertState& u0, double dt, double horizon,
                            std::uint64_t seed);

/// Terminal state of the EM recursion driven by the given increments.
Eigen::VectorXd em_terminal_from_increments(const ModeSpectrum& spec, const TraceClassQ& q,
                                            const Eigen::VectorXd& u0, double dt,
                                            const Eigen::MatrixXd& increments);

/// Left-point Riemann-Ito sum of S(T - t_m) Q^{1/2} dW_m over the path grid.
HilbertState stochastic_convolution(const ModeSpectrum& spec, const TraceClassQ& q,
                                    const PathRecord& path);

/// Terminal state of the mild solution discretized with the same left-point
/// rule: S(T) u0 + sum_m S(T - t_m) Q^{1/2} dW_m.
Eigen::VectorXd mild_terminal_from_increments(const ModeSpectrum& spec, const TraceClassQ& q,
                                              const Eigen::VectorXd& u0,
                                              const Eigen::VectorXd& times,
                                              const Eigen::MatrixXd& increments);

/// Independent terminal samples at t = T. Exact mode takes a single Gaussian
/// transition of size T; EM mode integrates em_steps Euler steps. Sample i
/// draws from stream i of `seed`, so the ensemble is reproducible and
/// independent of the worker count.
Ensemble sample_ensemble(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                         double horizon, int n_samples, SamplingMode mode, std::uint64_t seed,
                         int em_steps = 0);

}  // namespace spdescore
