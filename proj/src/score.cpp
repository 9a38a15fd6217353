#include "spdescore/score.hpp"

#include <cmath>

#include "spdescore/errors.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

namespace {

constexpr double kSupportTol = 1e-8;

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Mean of a N(mu, sigma^2) variable conditioned on the interval (lo, hi).
double truncated_normal_mean(double mu, double sigma, double lo, double hi) {
    if (!(sigma > 0.0)) return mu;  // degenerate law
    const double alpha = (lo - mu) / sigma;
    const double beta = (hi - mu) / sigma;
    const double mass = normal_cdf(beta) - normal_cdf(alpha);
    if (mass <= 0.0) return 0.5 * (lo + hi);
    return mu + sigma * (normal_pdf(alpha) - normal_pdf(beta)) / mass;
}

}  // namespace

ScoreContext::ScoreContext(ModeSpectrum spec, TraceClassQ q, HilbertState u0, double horizon,
                           double pinv_threshold)
    : spec_(std::move(spec)),
      q_(std::move(q)),
      u0_(std::move(u0)),
      horizon_(horizon),
      cov_(malliavin_covariance(spec_, q_, horizon, pinv_threshold)),
      mean_((spec_.decay(horizon) * u0_.coeffs().array()).matrix()) {
    if (u0_.basis_id() != spec_.basis_id() || u0_.size() != spec_.n_modes())
        throw DimensionError("initial state basis does not match the spectrum");
}

HilbertState score_full(const ScoreContext& ctx, const HilbertState& u) {
    if (u.basis_id() != ctx.spectrum().basis_id() || u.size() != ctx.spectrum().n_modes())
        throw DimensionError("state basis does not match the spectrum");
    return HilbertState(-ctx.covariance().apply_pinv(u.coeffs() - ctx.mean()),
                        ctx.spectrum().basis_id());
}

DirectionalScore score_directional(const ScoreContext& ctx, const HilbertState& u,
                                   const HilbertState& h) {
    if (h.basis_id() != ctx.spectrum().basis_id() || h.size() != ctx.spectrum().n_modes())
        throw DimensionError("direction basis does not match the spectrum");
    DirectionalScore out;
    out.direction_out_of_range = ctx.covariance().out_of_range_fraction(h.coeffs()) > kSupportTol;
    out.value = score_full(ctx, u).coeffs().dot(h.coeffs());
    return out;
}

LogDensityValue gaussian_logdensity_oracle(const ScoreContext& ctx, const HilbertState& u) {
    if (u.basis_id() != ctx.spectrum().basis_id() || u.size() != ctx.spectrum().n_modes())
        throw DimensionError("state basis does not match the spectrum");
    const MalliavinCov& cov = ctx.covariance();
    const Eigen::VectorXd diff = u.coeffs() - ctx.mean();

    LogDensityValue out;
    out.out_of_support = cov.out_of_range_fraction(diff) > kSupportTol;

    double log_det = 0.0;
    const double mu_max = std::max(cov.eigenvalues().maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < cov.eigenvalues().size(); ++i) {
        const double mu = cov.eigenvalues()[i];
        if (mu > cov.pinv_threshold() * mu_max) log_det += std::log(2.0 * M_PI * mu);
    }
    out.value = -0.5 * diff.dot(cov.apply_pinv(diff)) - 0.5 * log_det;
    return out;
}

namespace {

/// Single-mode EM paths: terminal state u(T) paired with the Ito integral of
/// the covering field of h, per sample.
void sample_terminal_and_ito(const ScoreContext& ctx, const HilbertState& h, long n_samples,
                             int n_steps, std::uint64_t seed, Eigen::VectorXd& terminal,
                             Eigen::VectorXd& deltas) {
    if (ctx.spectrum().n_modes() != 1)
        throw InvalidParameterError("the conditional-expectation demo is single-mode");
    if (n_samples < 1) throw InvalidParameterError("n_samples must be >= 1");
    if (n_steps < 1) throw InvalidParameterError("n_steps must be >= 1");
    if (h.basis_id() != ctx.spectrum().basis_id() || h.size() != 1)
        throw DimensionError("direction basis does not match the spectrum");

    const double horizon = ctx.horizon();
    const double dt = horizon / n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const double lambda = ctx.spectrum().lambdas()[0];
    const double sqrt_q = ctx.q().sqrt_q()(0, 0);
    const double u0 = ctx.initial_state().coeffs()[0];
    const double weighted_h = ctx.covariance().apply_pinv(h.coeffs())[0];  // gamma^+ h

    Eigen::VectorXd v_grid(n_steps);
    for (int m = 0; m < n_steps; ++m)
        v_grid[m] = sqrt_q * std::exp(lambda * (horizon - dt * m)) * weighted_h;

    terminal.resize(n_samples);
    deltas.resize(n_samples);
    parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            std::mt19937_64 gen = make_stream(seed, i);
            // Fresh distribution per sample: the polar method caches a
            // second draw, which must not leak across stream boundaries.
            std::normal_distribution<double> normal;
            double state = u0;
            double delta = 0.0;
            for (int m = 0; m < n_steps; ++m) {
                const double dw = sqrt_dt * normal(gen);
                delta += v_grid[m] * dw;
                state += dt * lambda * state + sqrt_q * dw;
            }
            terminal[static_cast<Eigen::Index>(i)] = state;
            deltas[static_cast<Eigen::Index>(i)] = delta;
        }
    });
}

}  // namespace

BismutDemoResult bismut_consistency_demo(const ScoreContext& ctx, const HilbertState& h,
                                         long n_samples, int n_bins, int n_steps,
                                         std::uint64_t seed) {
    if (n_bins < 5) throw InvalidParameterError("n_bins must be >= 5");

    Eigen::VectorXd terminal;
    Eigen::VectorXd deltas;
    sample_terminal_and_ito(ctx, h, n_samples, n_steps, seed, terminal, deltas);

    const double mean = ctx.mean()[0];
    const double variance = ctx.covariance().gamma()(0, 0);
    const double sigma = std::sqrt(variance);

    BismutDemoResult out;
    out.n_samples = n_samples;
    out.bins.resize(n_bins);
    const double lo_edge = mean - 3.0 * sigma;
    const double width = (sigma > 0.0) ? 6.0 * sigma / n_bins : 1.0;  // avoid NaN bins at Q = 0

    std::vector<double> sum(n_bins, 0.0), sum_sq(n_bins, 0.0);
    std::vector<long> count(n_bins, 0);
    for (long i = 0; i < n_samples; ++i) {
        const int b = static_cast<int>(std::floor((terminal[i] - lo_edge) / width));
        if (b < 0 || b >= n_bins) continue;
        sum[b] += deltas[i];
        sum_sq[b] += deltas[i] * deltas[i];
        ++count[b];
    }

    const double pinv_scalar = (variance > 0.0) ? 1.0 / variance : 0.0;
    for (int b = 0; b < n_bins; ++b) {
        BismutBin& bin = out.bins[b];
        bin.lo = lo_edge + b * width;
        bin.hi = bin.lo + width;
        bin.center = 0.5 * (bin.lo + bin.hi);
        bin.count = count[b];
        bin.conditional_mean_u = truncated_normal_mean(mean, sigma, bin.lo, bin.hi);
        bin.analytic = pinv_scalar * (bin.conditional_mean_u - mean) * h.coeffs()[0];
        bin.analytic_at_midpoint = pinv_scalar * (bin.center - mean) * h.coeffs()[0];
        if (count[b] > 1) {
            bin.mc_mean = sum[b] / count[b];
            const double var =
                (sum_sq[b] - count[b] * bin.mc_mean * bin.mc_mean) / (count[b] - 1);
            bin.mc_stderr = std::sqrt(std::max(var, 0.0) / count[b]);
        }
        bin.counted = count[b] >= out.min_count;
        if (bin.counted) {
            bin.z = (bin.mc_stderr > 0.0) ? (bin.mc_mean - bin.analytic) / bin.mc_stderr : 0.0;
            out.max_abs_z = std::max(out.max_abs_z, std::abs(bin.z));
            if (std::abs(bin.z) > 4.0) out.pass = false;
        }
    }
    return out;
}

std::vector<KernelRegressionPoint> bismut_kernel_regression_demo(const ScoreContext& ctx,
                                                                 const HilbertState& h,
                                                                 long n_samples, int n_eval,
                                                                 int n_steps, std::uint64_t seed) {
    if (n_eval < 2) throw InvalidParameterError("n_eval must be >= 2");

    Eigen::VectorXd terminal;
    Eigen::VectorXd deltas;
    sample_terminal_and_ito(ctx, h, n_samples, n_steps, seed, terminal, deltas);

    const double mean = ctx.mean()[0];
    const double variance = ctx.covariance().gamma()(0, 0);
    const double sigma = std::sqrt(variance);
    const double pinv_scalar = (variance > 0.0) ? 1.0 / variance : 0.0;

    const double u_mean = terminal.mean();
    const double u_sd = std::sqrt((terminal.array() - u_mean).square().sum() /
                                  std::max<long>(n_samples - 1, 1));
    const double bandwidth =
        0.5 * u_sd * std::pow(static_cast<double>(n_samples), -0.2) + 1e-300;

    std::vector<KernelRegressionPoint> out(n_eval);
    for (int p = 0; p < n_eval; ++p) {
        const double u = mean - 2.0 * sigma + 4.0 * sigma * p / (n_eval - 1);
        double num = 0.0;
        double den = 0.0;
        for (long i = 0; i < n_samples; ++i) {
            const double z = (terminal[i] - u) / bandwidth;
            const double w = std::exp(-0.5 * z * z);
            num += w * deltas[i];
            den += w;
        }
        out[p].u = u;
        out[p].weight_mass = den;
        out[p].estimate = (den > 0.0) ? num / den : 0.0;
        out[p].analytic = pinv_scalar * (u - mean) * h.coeffs()[0];
    }
    return out;
}

}  // namespace spdescore
