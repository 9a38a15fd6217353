#include "spdescore/verify.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "spdescore/errors.hpp"
#include "spdescore/forward.hpp"
#include "spdescore/malliavin.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/quadrature.hpp"
#include "spdescore/reverse.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

namespace {

double uniform(std::mt19937_64& gen, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
}

int uniform_int(std::mt19937_64& gen, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen);
}

Eigen::VectorXd random_unit(std::mt19937_64& gen, Eigen::Index n) {
    Eigen::VectorXd v = normal_vector(gen, n);
    const double norm = v.norm();
    return norm > 0.0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Unit(n, 0);
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_mc = 0.0;
};

MeanStderr mean_stderr(const Eigen::VectorXd& samples) {
    MeanStderr out;
    const auto n = static_cast<double>(samples.size());
    out.mean = samples.mean();
    const double var = (samples.array() - out.mean).square().sum() / (n - 1.0);
    out.stderr_mc = std::sqrt(var / n);
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace

Instance random_instance(std::mt19937_64& gen, int n_max, bool force_dense,
                         bool allow_rank_deficient) {
    const int n = uniform_int(gen, 1, n_max);
    const double nu = uniform(gen, 0.1, 2.0);
    Eigen::VectorXd lambdas(n);
    for (int k = 1; k <= n; ++k) lambdas[k - 1] = -nu * k * k;
    ModeSpectrum spectrum{std::move(lambdas)};

    const bool dense = force_dense || uniform(gen, 0.0, 1.0) < 0.5;
    const bool deficient = allow_rank_deficient && n >= 2 && uniform(gen, 0.0, 1.0) < 0.5;
    std::ostringstream desc;
    desc << "N=" << n << " nu=" << fmt(nu);

    if (!dense) {
        const double amplitude = uniform(gen, 0.5, 2.0);
        const double decay = uniform(gen, 1.5, 3.0);
        if (!deficient) {
            desc << " Q=power_law(a=" << fmt(amplitude) << ",p=" << fmt(decay) << ")";
            return {std::move(spectrum), make_power_law_q(n, amplitude, decay), desc.str()};
        }
        Eigen::VectorXd diag(n);
        for (int k = 1; k <= n; ++k) diag[k - 1] = amplitude * std::pow(k, -decay);
        diag[n - 1] = 0.0;  // kill the last noise mode
        desc << " Q=power_law_rank_deficient";
        return {std::move(spectrum), make_dense_q(diag.asDiagonal()), desc.str()};
    }

    // Dense PSD from a decaying-row random factor.
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i) {
        const double row_scale = std::pow(static_cast<double>(i + 1), -1.2);
        for (int j = 0; j < n; ++j)
            b(i, j) = row_scale * std::normal_distribution<double>()(gen);
    }
    Eigen::MatrixXd q = b * b.transpose();
    if (deficient) {
        const int k = uniform_int(gen, 0, n - 1);
        q.row(k).setZero();
        q.col(k).setZero();
        desc << " Q=dense_rank_deficient";
    } else {
        desc << " Q=dense(BB^T)";
    }
    return {std::move(spectrum), make_dense_q(std::move(q)), desc.str()};
}

double score_fd_residual(const ScoreContext& ctx, const HilbertState& u,
                         const HilbertState& claimed_score, std::mt19937_64& gen,
                         int n_directions) {
    const MalliavinCov& cov = ctx.covariance();
    const Eigen::Index n = cov.n_modes();
    double worst = 0.0;
    for (int d = 0; d < n_directions; ++d) {
        Eigen::VectorXd h = cov.project_range(random_unit(gen, n));
        const double h_norm = h.norm();
        if (h_norm < 1e-12) continue;
        h /= h_norm;
        const double sigma = std::sqrt(std::max(h.dot(cov.gamma() * h), 0.0));
        const double step = 1e-5 * std::max(sigma, 1e-8);

        const HilbertState up = ctx.spectrum().state(u.coeffs() + step * h);
        const HilbertState down = ctx.spectrum().state(u.coeffs() - step * h);
        const double fd = (gaussian_logdensity_oracle(ctx, up).value -
                           gaussian_logdensity_oracle(ctx, down).value) /
                          (2.0 * step);
        const double analytic = claimed_score.coeffs().dot(h);
        worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(fd), 1e-300));
    }
    return worst;
}

CheckReport check_covariance_closed_form(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "01_covariance_closed_form";
    rep.threshold = 1e-12;
    const int n_instances = profile == Profile::full ? 100 : 20;
    std::mt19937_64 gen = make_stream(derive_root(seed, rep.id), 0);

    double worst = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        const Instance inst = random_instance(gen, 16);
        const double t = uniform(gen, 0.1, 2.0);
        const Eigen::MatrixXd closed = stochastic_convolution_covariance(inst.spectrum, inst.q, t);
        const Eigen::MatrixXd quad = gl_integrate_to_tolerance(
            [&](double s) -> Eigen::MatrixXd {
                const Eigen::ArrayXd decay = inst.spectrum.decay(s);
                return decay.matrix().asDiagonal() * inst.q.q() * decay.matrix().asDiagonal();
            },
            0.0, t, 1e-14);
        const double scale = std::max(quad.cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (closed - quad).cwiseAbs().maxCoeff() / scale);
    }
    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_instances) + " random instances, N<=16, t in [0.1,2]";
    rep.detail = "closed form vs quadrature, max rel entry error " + fmt(worst);
    return rep;
}

CheckReport check_covariance_recursion(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "02_covariance_recursion";
    rep.threshold = 1e-12;
    const int n_pairs = profile == Profile::full ? 50 : 15;
    std::mt19937_64 gen = make_stream(derive_root(seed, rep.id), 0);

    double worst = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        const Instance inst = random_instance(gen, 16, /*force_dense=*/true);
        const double t = uniform(gen, 0.0, 1.2);
        const double s = uniform(gen, 0.0, 1.2);
        worst = std::max(worst, covariance_recursion_residual(inst.spectrum, inst.q, t, s));
    }
    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_pairs) + " random (t,s) pairs, dense Q, N<=16";
    rep.detail = "gamma(t+s) vs gamma(t) + S(t) gamma(s) S(t)^*, max rel error " + fmt(worst);
    return rep;
}

CheckReport check_covering_property(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "03_covering_property";
    rep.threshold = 1e-10;
    const int n_directions = profile == Profile::full ? 100 : 20;
    std::mt19937_64 gen = make_stream(derive_root(seed, rep.id), 0);

    double worst = 0.0;
    int done = 0;
    while (done < n_directions) {
        const Instance inst = random_instance(gen, 8, false, /*allow_rank_deficient=*/true);
        const double t = uniform(gen, 0.2, 1.5);
        const MalliavinCov cov = malliavin_covariance(inst.spectrum, inst.q, t);
        for (int k = 0; k < 4 && done < n_directions; ++k, ++done) {
            Eigen::VectorXd h;
            if (k == 1 && cov.rank() < cov.n_modes()) {
                // A direction in the kernel of gamma.
                h = cov.eigenvectors().col(0);
            } else if (k == 2) {
                h = cov.project_range(random_unit(gen, cov.n_modes()));
                if (h.norm() < 1e-12) h = random_unit(gen, cov.n_modes());
            } else {
                h = random_unit(gen, cov.n_modes());
            }
            const auto res = covering_property_check(inst.spectrum, inst.q, cov,
                                                     inst.spectrum.state(h));
            worst = std::max({worst, res.residual_closed, res.residual_quadrature});
        }
    }
    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_directions) +
                   " random directions (incl. kernel), N<=8, t in [0.2,1.5]";
    rep.detail = "<Du, v_h> vs Pi h by closed form and quadrature, max rel residual " + fmt(worst);
    return rep;
}

CheckReport check_minimal_norm(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "04_minimal_norm";
    rep.threshold = 1e-10;
    const int n_cases = profile == Profile::full ? 20 : 8;
    std::mt19937_64 gen = make_stream(derive_root(seed, rep.id), 0);

    double worst = 0.0;
    for (int i = 0; i < n_cases; ++i) {
        const Instance inst = random_instance(gen, 8);
        const double t = uniform(gen, 0.3, 1.5);
        const MalliavinCov cov = malliavin_covariance(inst.spectrum, inst.q, t);
        const HilbertState h = inst.spectrum.state(random_unit(gen, inst.spectrum.n_modes()));

        const MinimalNormResult res = minimal_norm_check(inst.spectrum, inst.q, cov, h, gen);
        worst = std::max({worst, res.pythagoras_residual, res.pairing_residual});
        if (!res.minimal) worst = std::max(worst, 1.0);

        // Every V-parametrized candidate pairs back to gamma g.
        const Eigen::VectorXd g = random_unit(gen, inst.spectrum.n_modes());
        const Eigen::VectorXd via_quad = dual_field_covering_value(inst.spectrum, inst.q, t, g);
        const Eigen::VectorXd direct = cov.gamma() * g;
        const double scale = std::max(direct.norm(), 1e-300);
        worst = std::max(worst, (via_quad - direct).norm() / scale);
    }
    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_cases) + " random orthogonal complements, N<=8";
    rep.detail =
        "Pythagoras + <Du,w>=0 + (Du)^*g reproduces gamma g, max residual " + fmt(worst);
    return rep;
}

CheckReport check_skorokhod_ito(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "05_skorokhod_ito";
    rep.threshold = 3.0;
    const int n_samples = profile == Profile::full ? 100000 : 10000;
    const int n_steps = profile == Profile::full ? 512 : 256;
    const std::uint64_t root = derive_root(seed, rep.id);
    std::mt19937_64 gen = make_stream(root, 0);

    // Modest |lambda| dt keeps the left-point Riemann bias of the discrete
    // isometry well inside the 3 sigma band.
    const int n = 4;
    const double nu = uniform(gen, 0.05, 0.15);
    Eigen::VectorXd lambdas(n);
    for (int k = 1; k <= n; ++k) lambdas[k - 1] = -nu * k * k;
    const ModeSpectrum spectrum{lambdas};
    const TraceClassQ q = make_power_law_q(n, 1.0, 2.0);
    const double horizon = 1.0;
    const double dt = horizon / n_steps;
    const double sqrt_dt = std::sqrt(dt);

    const MalliavinCov cov = malliavin_covariance(spectrum, q, horizon);
    const HilbertState h = spectrum.state(random_unit(gen, n));
    const CoveringField field = covering_field(spectrum, q, cov, h);

    Eigen::MatrixXd v_grid(n_steps, n);
    for (int m = 0; m < n_steps; ++m) v_grid.row(m) = field(dt * m);

    Eigen::VectorXd deltas(n_samples);
    parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            std::mt19937_64 g = make_stream(root, 1000 + i);
            double acc = 0.0;
            for (int m = 0; m < n_steps; ++m)
                acc += v_grid.row(m).dot(sqrt_dt * normal_vector(g, n));
            deltas[static_cast<Eigen::Index>(i)] = acc;
        }
    });

    const MeanStderr stats = mean_stderr(deltas);
    const double z_mean = stats.mean / stats.stderr_mc;

    const double target_var = gl_integrate_scalar_to_tolerance(
        [&](double r) { return field(r).squaredNorm(); }, 0.0, horizon);
    const double var_hat =
        (deltas.array() - stats.mean).square().sum() / static_cast<double>(n_samples - 1);
    const double m4 = (deltas.array() - stats.mean).pow(4).sum() / static_cast<double>(n_samples);
    const double stderr_var = std::sqrt(std::max(m4 - var_hat * var_hat, 0.0) / n_samples);
    const double z_var = (var_hat - target_var) / stderr_var;

    rep.metric = std::max(std::abs(z_mean), std::abs(z_var));
    rep.pass = rep.metric <= rep.threshold;
    std::ostringstream inst;
    inst << "N=4 nu=" << fmt(nu) << " T=1 dt=1/" << n_steps << " paths=" << n_samples;
    rep.instance = inst.str();
    rep.detail = "delta(v_h): |z_mean|=" + fmt(std::abs(z_mean)) +
                 ", isometry |z_var|=" + fmt(std::abs(z_var)) + " vs int ||v||^2 = " +
                 fmt(target_var);
    return rep;
}

CheckReport check_ibp_duality(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "06_ibp_duality";
    rep.threshold = 1.0;
    const int n_samples = profile == Profile::full ? 100000 : 10000;
    const std::uint64_t root = derive_root(seed, rep.id);
    std::mt19937_64 gen = make_stream(root, 0);

    double worst = 0.0;
    std::ostringstream detail;

    // Canonical single-mode case: target <h, h> = 1.
    {
        const ModeSpectrum spectrum{Eigen::VectorXd::Constant(1, -1.0)};
        const TraceClassQ q = make_power_law_q(1, 1.0, 2.0);
        const IbpResult res =
            ibp_duality_check(spectrum, q, spectrum.zero_state(), spectrum.state({1.0}), 1.0,
                              n_samples, 256, stream_seed(root, 1));
        const double ratio =
            std::abs(res.estimate - res.target) / (3.0 * res.stderr_mc + res.dt_band);
        worst = std::max(worst, ratio);
        detail << "canonical estimate=" << fmt(res.estimate) << " target=1";
    }

    if (profile == Profile::full) {
        for (int i = 0; i < 3; ++i) {
            const int n = uniform_int(gen, 2, 4);
            const double nu = uniform(gen, 0.1, 0.5);
            Eigen::VectorXd lambdas(n);
            for (int k = 1; k <= n; ++k) lambdas[k - 1] = -nu * k * k;
            const ModeSpectrum spectrum{lambdas};
            Eigen::MatrixXd b(n, n);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    b(r, c) = std::pow(r + 1.0, -1.2) * std::normal_distribution<double>()(gen);
            const TraceClassQ q = make_dense_q(b * b.transpose());
            const MalliavinCov cov = malliavin_covariance(spectrum, q, 1.0);
            Eigen::VectorXd h = cov.project_range(random_unit(gen, n));
            if (h.norm() < 1e-12) h = random_unit(gen, n);
            h.normalize();
            const HilbertState u0 = spectrum.state(0.2 * normal_vector(gen, n));
            const IbpResult res = ibp_duality_check(spectrum, q, u0, spectrum.state(h), 1.0,
                                                    n_samples, 512, stream_seed(root, 2 + i));
            const double ratio =
                std::abs(res.estimate - res.target) / (3.0 * res.stderr_mc + res.dt_band);
            worst = std::max(worst, ratio);
        }
        detail << " + 3 random dense instances N<=4";
    }

    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = "EM paths=" + std::to_string(n_samples) + ", dt=T/256..T/512";
    rep.detail = "E[<u,h> delta(v_h)] vs <h,Pi h> within 3 sigma + dt band; " + detail.str() +
                 "; worst band ratio " + fmt(worst);
    return rep;
}

CheckReport check_trace_identity(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "07_trace_identity";
    rep.threshold = 1.0;
    const int n_samples = profile == Profile::full ? 100000 : 10000;
    const std::uint64_t root = derive_root(seed, rep.id);
    std::mt19937_64 gen = make_stream(root, 0);

    // Analytic route: trace(gamma) against the HS-norm integral.
    double worst_analytic = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Instance inst = random_instance(gen, 16);
        const double t = uniform(gen, 0.1, 2.0);
        const double trace = malliavin_covariance(inst.spectrum, inst.q, t).trace();
        const double hs = hs_condition_value(inst.spectrum, inst.q, t);
        worst_analytic = std::max(worst_analytic, std::abs(trace - hs) / std::max(hs, 1e-300));
    }

    // Monte Carlo route: E ||W_A(T)||^2 over discretized convolutions.
    const int n = 4;
    const double nu = uniform(gen, 0.05, 0.15);
    Eigen::VectorXd lambdas(n);
    for (int k = 1; k <= n; ++k) lambdas[k - 1] = -nu * k * k;
    const ModeSpectrum spectrum{lambdas};
    const TraceClassQ q = make_power_law_q(n, 1.0, 2.0);
    const double horizon = 1.0;
    const int n_steps = profile == Profile::full ? 512 : 256;
    const double dt = horizon / n_steps;
    const double sqrt_dt = std::sqrt(dt);

    std::vector<Eigen::MatrixXd> kernels;
    kernels.reserve(n_steps);
    for (int m = 0; m < n_steps; ++m)
        kernels.push_back(spectrum.decay(horizon - dt * m).matrix().asDiagonal() * q.sqrt_q());

    Eigen::VectorXd sq_norms(n_samples);
    parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            std::mt19937_64 g = make_stream(root, 1000 + i);
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
            for (int m = 0; m < n_steps; ++m)
                acc += kernels[static_cast<std::size_t>(m)] * (sqrt_dt * normal_vector(g, n));
            sq_norms[static_cast<Eigen::Index>(i)] = acc.squaredNorm();
        }
    });
    const MeanStderr stats = mean_stderr(sq_norms);
    const double trace_target = malliavin_covariance(spectrum, q, horizon).trace();
    const double z = (stats.mean - trace_target) / stats.stderr_mc;

    rep.metric = std::max(worst_analytic / 1e-12, std::abs(z) / 3.0);
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = "20 random instances N<=16; MC N=4 nu=" + fmt(nu) + " paths=" +
                   std::to_string(n_samples);
    rep.detail = "trace(gamma) vs HS integral max rel " + fmt(worst_analytic) +
                 " (tol 1e-12); MC E||W_A||^2 z=" + fmt(z) + " (tol 3)";
    return rep;
}

CheckReport check_chain_rule(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "08_chain_rule";
    rep.threshold = 1e-6;
    const int n_cases = profile == Profile::full ? 20 : 8;
    const std::uint64_t root = derive_root(seed, rep.id);
    std::mt19937_64 gen = make_stream(root, 0);

    double worst = 0.0;
    for (int i = 0; i < n_cases; ++i) {
        const Instance inst = random_instance(gen, 8);
        const Eigen::Index n = inst.spectrum.n_modes();
        const HilbertState u0 = inst.spectrum.state(normal_vector(gen, n));
        const PathRecord path =
            simulate_em_path(inst.spectrum, inst.q, u0, 1.0 / 64.0, 1.0, stream_seed(root, 10 + i));

        // Linear functional at a random (sometimes off-grid) time.
        const double r_lin = uniform(gen, -0.1, 1.1);
        const PhiSpec lin = PhiSpec::linear(normal_vector(gen, n));
        worst = std::max(worst,
                         chain_rule_check(inst.spectrum, inst.q, path, lin, r_lin).max_rel_error);

        // Quadratic functional.
        const Eigen::MatrixXd raw =
            Eigen::MatrixXd::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) {
                return std::normal_distribution<double>()(gen);
            });
        const PhiSpec quad = PhiSpec::quadratic(0.5 * (raw + raw.transpose()));
        const double r_quad = uniform(gen, 0.0, 1.0);
        worst = std::max(worst,
                         chain_rule_check(inst.spectrum, inst.q, path, quad, r_quad).max_rel_error);
    }
    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_cases) + " random instances, linear + quadratic phi, N<=8";
    rep.detail = "adjoint composition vs path-perturbation FD, max rel error " + fmt(worst);
    return rep;
}

CheckReport check_score_exactness(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "09_score_exactness";
    rep.threshold = 1.0;
    const int n_cases = profile == Profile::full ? 100 : 25;
    std::mt19937_64 gen = make_stream(derive_root(seed, rep.id), 0);

    double worst_fd = 0.0;
    for (int i = 0; i < n_cases; ++i) {
        const Instance inst = random_instance(gen, 8);
        const Eigen::Index n = inst.spectrum.n_modes();
        const double horizon = uniform(gen, 0.3, 1.5);
        const ScoreContext ctx(inst.spectrum, inst.q,
                               inst.spectrum.state(normal_vector(gen, n)), horizon);
        // Draw u inside the affine support mean + Ran(gamma).
        const Eigen::VectorXd u_vec =
            ctx.mean() + ctx.covariance().sqrt() * normal_vector(gen, n);
        const HilbertState u = inst.spectrum.state(u_vec);
        worst_fd = std::max(worst_fd, score_fd_residual(ctx, u, score_full(ctx, u), gen, 2));
    }

    // Single-mode closed form -(u - m)/sigma^2.
    const ModeSpectrum single{Eigen::VectorXd::Constant(1, -1.0)};
    const TraceClassQ q1 = make_power_law_q(1, 1.0, 2.0);
    const ScoreContext ctx1(single, q1, single.zero_state(), 1.0);
    const double sigma2 = ctx1.covariance().gamma()(0, 0);
    const double u_val = 1.0;
    const double expected = -(u_val - 0.0) / sigma2;
    const double got = score_full(ctx1, single.state({u_val})).coeffs()[0];
    const double single_rel = std::abs(got - expected) / std::abs(expected);

    rep.metric = std::max(worst_fd / 1e-6, single_rel / 1e-12);
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = std::to_string(n_cases) + " random (instance, u), N<=8";
    rep.detail = "score vs FD of log-density max rel " + fmt(worst_fd) +
                 " (tol 1e-6); single-mode closed form rel " + fmt(single_rel) + " (tol 1e-12)";
    return rep;
}

CheckReport check_bismut_demo(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "10_bismut_binned_demo";
    rep.threshold = 4.0;
    const long n_samples = profile == Profile::full ? 1000000 : 100000;
    const int n_steps = profile == Profile::full ? 2048 : 1024;
    const std::uint64_t root = derive_root(seed, rep.id);

    const ModeSpectrum spectrum{Eigen::VectorXd::Constant(1, -1.0)};
    const TraceClassQ q = make_power_law_q(1, 1.0, 2.0);
    const ScoreContext ctx(spectrum, q, spectrum.zero_state(), 1.0);
    const BismutDemoResult res = bismut_consistency_demo(ctx, spectrum.state({1.0}), n_samples,
                                                         21, n_steps, stream_seed(root, 1));

    rep.metric = res.max_abs_z;
    rep.pass = res.pass;
    rep.instance = "N=1 lambda=-1 q=1 T=1, samples=" + std::to_string(n_samples) + ", 21 bins";
    long counted = 0;
    for (const auto& bin : res.bins) counted += bin.counted ? 1 : 0;
    rep.detail = "binned E[delta | u bin] vs analytic conditional score, " +
                 std::to_string(counted) + " bins with >=200 samples, max |z| " + fmt(res.max_abs_z);
    return rep;
}

CheckReport check_reverse_marginals(Profile profile, std::uint64_t seed) {
    CheckReport rep;
    rep.id = "11_reverse_marginal_tracking";
    rep.threshold = 1.0;
    const int n_samples = profile == Profile::full ? 100000 : 20000;
    const int base_steps = profile == Profile::full ? 128 : 64;
    const std::uint64_t root = derive_root(seed, rep.id);
    std::mt19937_64 gen = make_stream(root, 0);

    const int n = 8;
    const ModeSpectrum spectrum = make_dirichlet_laplacian(n, 1.0, 0.015);
    Eigen::MatrixXd b(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            b(r, c) = std::pow(r + 1.0, -1.2) * std::normal_distribution<double>()(gen);
    const TraceClassQ q = make_dense_q(0.5 * (b * b.transpose()));
    Eigen::VectorXd u0_vec(n);
    for (int k = 1; k <= n; ++k) u0_vec[k - 1] = 1.0 / (k * k);
    const HilbertState u0 = spectrum.state(u0_vec);

    const double horizon = 1.0;
    const double t_min = 0.1;
    const GaussianMoments target{
        (spectrum.decay(t_min) * u0_vec.array()).matrix(),
        stochastic_convolution_covariance(spectrum, q, t_min)};
    const GaussianMoments start_law{
        (spectrum.decay(horizon) * u0_vec.array()).matrix(),
        stochastic_convolution_covariance(spectrum, q, horizon)};

    double worst = 0.0;
    std::ostringstream detail;
    int purpose = 1;
    for (ReverseMode mode : {ReverseMode::sde, ReverseMode::ode}) {
        const ScoreContextCache cache(spectrum, q, u0, t_min, horizon, base_steps);
        const ScoreContextCache cache_fine(spectrum, q, u0, t_min, horizon, 2 * base_steps);

        const Ensemble start = sample_ensemble(spectrum, q, u0, horizon, n_samples,
                                               SamplingMode::exact, stream_seed(root, purpose++));
        const Ensemble end =
            run_reverse_ensemble(cache, start, mode, stream_seed(root, purpose++));

        Eigen::VectorXd emp_mean = end.states.colwise().mean();
        Eigen::MatrixXd centered = end.states.rowwise() - emp_mean.transpose();
        Eigen::MatrixXd emp_cov =
            centered.transpose() * centered / static_cast<double>(n_samples - 1);

        const GaussianMoments disc = reverse_discrete_moments(cache, mode, start_law);
        const GaussianMoments disc_fine = reverse_discrete_moments(cache_fine, mode, start_law);

        // Per-entry: empirical within k sigma of the continuous target plus
        // the exact discretization gap of the scheme. The sweep spans 176
        // mean/covariance comparisons, so the Bonferroni multiplier that
        // keeps the suite false-failure rate under 1% is 4.5.
        const double k_sigma = 4.5;
        double worst_mean = 0.0;
        double worst_cov = 0.0;
        for (int i = 0; i < n; ++i) {
            const double se = std::sqrt(disc.cov(i, i) / n_samples);
            const double gap = std::abs(disc.mean[i] - target.mean[i]);
            const double tol = k_sigma * se + gap;
            worst_mean = std::max(worst_mean, std::abs(emp_mean[i] - target.mean[i]) / tol);
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                const double se = std::sqrt(
                    (disc.cov(i, i) * disc.cov(j, j) + disc.cov(i, j) * disc.cov(i, j)) /
                    n_samples);
                const double gap = std::abs(disc.cov(i, j) - target.cov(i, j));
                const double tol = k_sigma * se + gap;
                worst_cov = std::max(worst_cov, std::abs(emp_cov(i, j) - target.cov(i, j)) / tol);
            }
        }
        worst = std::max({worst, worst_mean, worst_cov});
        detail << (mode == ReverseMode::sde ? "sde" : "ode") << " mean_band=" << fmt(worst_mean)
               << " cov_band=" << fmt(worst_cov) << " ";

        // First-order convergence: the exact discretization gap halves.
        const double gap_coarse =
            std::max((disc.mean - target.mean).cwiseAbs().maxCoeff(),
                     (disc.cov - target.cov).cwiseAbs().maxCoeff());
        const double gap_fine =
            std::max((disc_fine.mean - target.mean).cwiseAbs().maxCoeff(),
                     (disc_fine.cov - target.cov).cwiseAbs().maxCoeff());
        const double ratio = gap_coarse / std::max(gap_fine, 1e-300);
        worst = std::max(worst, std::abs(ratio - 2.0) / 0.4);
        detail << "ratio=" << fmt(ratio) << " ";
    }

    rep.metric = worst;
    rep.pass = rep.metric <= rep.threshold;
    rep.instance = "N=8 dense Q, T=1, t_min=0.1, steps " + std::to_string(base_steps) + "/" +
                   std::to_string(2 * base_steps) + ", samples=" + std::to_string(n_samples);
    rep.detail = "moments vs m(t_min), gamma(t_min) within 4.5 sigma + exact dt gap; " +
                 detail.str() + "worst band ratio " + fmt(worst);
    return rep;
}

std::vector<CheckReport> run_suite(Profile profile, std::uint64_t seed) {
    using Check = CheckReport (*)(Profile, std::uint64_t);
    const Check checks[] = {
        check_covariance_closed_form, check_covariance_recursion, check_covering_property,
        check_minimal_norm,           check_skorokhod_ito,        check_ibp_duality,
        check_trace_identity,         check_chain_rule,           check_score_exactness,
        check_bismut_demo,            check_reverse_marginals,
    };
    std::vector<CheckReport> reports;
    reports.reserve(std::size(checks));
    for (Check check : checks) {
        const auto start = std::chrono::steady_clock::now();
        CheckReport rep = check(profile, seed);
        rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        reports.push_back(std::move(rep));
    }
    return reports;
}

bool all_passed(const std::vector<CheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.pass) return false;
    return true;
}

nlohmann::json report_to_json(const std::vector<CheckReport>& reports, Profile profile,
                              std::uint64_t seed) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& r : reports) {
        checks.push_back({{"id", r.id},
                          {"instance", r.instance},
                          {"metric", r.metric},
                          {"threshold", r.threshold},
                          {"verdict", r.pass ? "pass" : "fail"},
                          {"detail", r.detail}});
    }
    return nlohmann::json{{"profile", profile == Profile::full ? "full" : "quick"},
                          {"seed", seed},
                          {"all_passed", all_passed(reports)},
                          {"checks", checks}};
}

}  // namespace spdescore
