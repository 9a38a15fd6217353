#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "spdescore/covariance_op.hpp"
#include "spdescore/malliavin.hpp"
#include "spdescore/spectrum.hpp"
#include "spdescore/state.hpp"

namespace spdescore {

/// Everything the closed-form score at a fixed horizon needs: the problem
/// instance, the covariance operator at T, and the cached mean S(T) u0.
class ScoreContext {
public:
    ScoreContext(ModeSpectrum spec, TraceClassQ q, HilbertState u0, double horizon,
                 double pinv_threshold = 1e-12);

    const ModeSpectrum& spectrum() const { return spec_; }
    const TraceClassQ& q() const { return q_; }
    const HilbertState& initial_state() const { return u0_; }
    const MalliavinCov& covariance() const { return cov_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    double horizon() const { return horizon_; }

private:
    ModeSpectrum spec_;
    TraceClassQ q_;
    HilbertState u0_;
    double horizon_;
    MalliavinCov cov_;
    Eigen::VectorXd mean_;
};

/// Closed-form score: -gamma^+ (u - S(T) u0).
HilbertState score_full(const ScoreContext& ctx, const HilbertState& u);

struct DirectionalScore {
    double value = 0.0;
    bool direction_out_of_range = false;
};

/// <score_full(u), h>, flagging h with a material component outside the
/// retained range of gamma.
DirectionalScore score_directional(const ScoreContext& ctx, const HilbertState& u,
                                   const HilbertState& h);

struct LogDensityValue {
    double value = 0.0;
    bool out_of_support = false;
};

/// Log-density of the Gaussian law N(S(T) u0, gamma) on the affine support
/// mean + Ran(gamma), from the eigendecomposition:
/// -1/2 <d, gamma^+ d> - 1/2 sum_retained log(2 pi mu_i).
LogDensityValue gaussian_logdensity_oracle(const ScoreContext& ctx, const HilbertState& u);

/// One bin of the single-mode conditional-expectation demonstration.
struct BismutBin {
    double lo = 0.0;
    double hi = 0.0;
    double center = 0.0;
    /// Conditional mean of u(T) inside the bin under the analytic Gaussian law.
    double conditional_mean_u = 0.0;
    long count = 0;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    /// Analytic value of -score at the bin's conditional mean, paired with h.
    double analytic = 0.0;
    /// -score evaluated at the geometric midpoint, reported for reference.
    double analytic_at_midpoint = 0.0;
    double z = 0.0;
    bool counted = false;  // count >= min_count enters the verdict
};

struct BismutDemoResult {
    std::vector<BismutBin> bins;
    long n_samples = 0;
    long min_count = 200;
    double max_abs_z = 0.0;
    bool pass = true;
};

/// Single-mode Monte Carlo check of the conditional-expectation form of the
/// score: bins terminal EM samples by u(T) and compares the per-bin mean of
/// the Ito integral of the covering field against the analytic conditional
/// expectation for the Gaussian pair. Diagnostic: bins below min_count are
/// reported but not judged.
BismutDemoResult bismut_consistency_demo(const ScoreContext& ctx, const HilbertState& h,
                                         long n_samples, int n_bins, int n_steps,
                                         std::uint64_t seed);

struct KernelRegressionPoint {
    double u = 0.0;
    double estimate = 0.0;   // Nadaraya-Watson estimate of E[delta(v_h) | u(T) ~= u]
    double analytic = 0.0;   // -score at u, paired with h
    double weight_mass = 0.0;
};

/// Diagnostic-only kernel-regression variant of the demonstration above:
/// Gaussian kernel with Silverman-style bandwidth 0.5 * stddev * n^{-1/5},
/// evaluated on a uniform grid of n_eval points across mean +- 2 sigma.
std::vector<KernelRegressionPoint> bismut_kernel_regression_demo(const ScoreContext& ctx,
                                                                 const HilbertState& h,
                                                                 long n_samples, int n_eval,
                                                                 int n_steps, std::uint64_t seed);

}  // namespace spdescore
