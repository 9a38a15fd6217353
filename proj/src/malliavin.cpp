#include "spdescore/malliavin.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "spdescore/errors.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/quadrature.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

namespace {

void check_pair(const ModeSpectrum& spec, const TraceClassQ& q) {
    if (q.n_modes() != spec.n_modes())
        throw DimensionError("covariance dimension does not match the spectrum");
}

void check_direction(const ModeSpectrum& spec, const HilbertState& h) {
    if (h.basis_id() != spec.basis_id() || h.size() != spec.n_modes())
        throw DimensionError("direction basis does not match the spectrum");
}

constexpr double kOutOfRangeTol = 1e-8;
constexpr double kTiny = 1e-300;

}  // namespace

MalliavinCov::MalliavinCov(Eigen::MatrixXd gamma, double horizon, double pinv_threshold)
    : horizon_(horizon), pinv_threshold_(pinv_threshold) {
    if (gamma.rows() < 1 || gamma.rows() != gamma.cols())
        throw DimensionError("covariance operator must be square and non-empty");
    if (horizon < 0.0) throw InvalidParameterError("horizon must be non-negative");
    if (!(pinv_threshold > 0.0))
        throw InvalidParameterError("pseudoinverse threshold must be positive");

    const double scale = gamma.cwiseAbs().maxCoeff();
    const double asym = (gamma - gamma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(scale, kTiny))
        throw NotSymmetricError("covariance operator is not symmetric within tolerance");
    gamma_ = 0.5 * (gamma + gamma.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma_);
    if (es.info() != Eigen::Success)
        throw NotPsdError("eigendecomposition of the covariance operator failed");
    eigvals_ = es.eigenvalues();
    eigvecs_ = es.eigenvectors();

    const double mu_max = std::max(eigvals_.maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
        if (eigvals_[i] < -1e-12 * std::max(mu_max, kTiny))
            throw NotPsdError("covariance operator has a negative eigenvalue");
        if (eigvals_[i] < 0.0) eigvals_[i] = 0.0;
    }

    const Eigen::Index n = gamma_.rows();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd keep = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (eigvals_[i] > pinv_threshold_ * mu_max) {
            inv[i] = 1.0 / eigvals_[i];
            keep[i] = 1.0;
            ++rank_;
        }
    }
    pinv_ = eigvecs_ * inv.asDiagonal() * eigvecs_.transpose();
    projection_ = eigvecs_ * keep.asDiagonal() * eigvecs_.transpose();
}

Eigen::MatrixXd MalliavinCov::sqrt() const {
    return eigvecs_ * eigvals_.cwiseSqrt().asDiagonal() * eigvecs_.transpose();
}

double MalliavinCov::out_of_range_fraction(const Eigen::VectorXd& v) const {
    const double norm = v.norm();
    if (norm == 0.0) return 0.0;
    return (v - projection_ * v).norm() / norm;
}

MalliavinCov malliavin_covariance(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                  double pinv_threshold) {
    return MalliavinCov(stochastic_convolution_covariance(spec, q, t), t, pinv_threshold);
}

Eigen::MatrixXd pseudoinverse(const MalliavinCov& cov) { return cov.pinv(); }

double covariance_recursion_residual(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                     double s) {
    if (t < 0.0 || s < 0.0) throw InvalidParameterError("times must be non-negative");
    const Eigen::MatrixXd whole = stochastic_convolution_covariance(spec, q, t + s);
    const Eigen::MatrixXd head = stochastic_convolution_covariance(spec, q, t);
    const Eigen::MatrixXd tail = stochastic_convolution_covariance(spec, q, s);
    const Eigen::ArrayXd decay = spec.decay(t);

    const Eigen::MatrixXd propagated =
        decay.matrix().asDiagonal() * tail * decay.matrix().asDiagonal();
    const double scale = whole.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (whole - head - propagated).cwiseAbs().maxCoeff() / scale;
}

Eigen::MatrixXd malliavin_derivative(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                     double r) {
    check_pair(spec, q);
    if (t < 0.0) throw InvalidParameterError("horizon must be non-negative");
    if (r < 0.0 || r > t) return Eigen::MatrixXd::Zero(spec.n_modes(), spec.n_modes());
    return spec.decay(t - r).matrix().asDiagonal() * q.sqrt_q();
}

CoveringField::CoveringField(Eigen::VectorXd lambdas, Eigen::MatrixXd sqrt_q_t,
                             Eigen::VectorXd weighted, Eigen::VectorXd h, double horizon,
                             bool out_of_range)
    : lambdas_(std::move(lambdas)),
      sqrt_q_t_(std::move(sqrt_q_t)),
      weighted_(std::move(weighted)),
      h_(std::move(h)),
      horizon_(horizon),
      out_of_range_(out_of_range) {}

Eigen::VectorXd CoveringField::operator()(double r) const {
    if (r < 0.0 || r > horizon_) return Eigen::VectorXd::Zero(lambdas_.size());
    const Eigen::ArrayXd decay = (lambdas_.array() * (horizon_ - r)).exp();
    return sqrt_q_t_ * (decay * weighted_.array()).matrix();
}

CoveringField covering_field(const ModeSpectrum& spec, const TraceClassQ& q,
                             const MalliavinCov& cov, const HilbertState& h) {
    check_pair(spec, q);
    check_direction(spec, h);
    if (cov.n_modes() != spec.n_modes())
        throw DimensionError("covariance operator dimension does not match the spectrum");

    const bool flagged = cov.out_of_range_fraction(h.coeffs()) > kOutOfRangeTol;
    return CoveringField(spec.lambdas(), q.sqrt_q().transpose(), cov.apply_pinv(h.coeffs()),
                         h.coeffs(), cov.horizon(), flagged);
}

CoveringCheckResult covering_property_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                            const MalliavinCov& cov, const HilbertState& h) {
    const CoveringField field = covering_field(spec, q, cov, h);
    const double t = cov.horizon();

    CoveringCheckResult out;
    out.projected_h = cov.project_range(h.coeffs());
    out.closed_form = cov.gamma() * field.weighted_direction();
    out.quadrature = gl_integrate_to_tolerance(
        [&](double r) -> Eigen::VectorXd {
            const Eigen::VectorXd noise = q.sqrt_q() * field(r);
            return (spec.decay(t - r) * noise.array()).matrix();
        },
        0.0, t);

    const double scale = std::max(h.norm(), kTiny);
    out.residual_closed = (out.closed_form - out.projected_h).norm() / scale;
    out.residual_quadrature = (out.quadrature - out.projected_h).norm() / scale;
    return out;
}

double skorokhod_integral(const CoveringField& field, const PathRecord& path) {
    const Eigen::Index m_steps = path.increments.rows();
    const double horizon = path.horizon();
    if (std::abs(field.horizon() - horizon) > 1e-9 * std::max(1.0, horizon))
        throw DimensionError("field horizon does not match the path grid");
    if (field.n_modes() != path.increments.cols())
        throw DimensionError("field dimension does not match the path increments");

    double acc = 0.0;
    for (Eigen::Index m = 0; m < m_steps; ++m)
        acc += field(path.times[m]).dot(path.increments.row(m));
    return acc;
}

IbpResult ibp_duality_check(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                            const HilbertState& h, double horizon, int n_samples, int n_steps,
                            std::uint64_t seed) {
    check_pair(spec, q);
    check_direction(spec, u0);
    check_direction(spec, h);
    if (n_samples < 2) throw InvalidParameterError("n_samples must be >= 2");
    if (n_steps < 1) throw InvalidParameterError("n_steps must be >= 1");
    if (!(horizon > 0.0)) throw InvalidParameterError("horizon must be positive");

    const Eigen::Index n = spec.n_modes();
    const double dt = horizon / n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const MalliavinCov cov = malliavin_covariance(spec, q, horizon);
    const CoveringField field = covering_field(spec, q, cov, h);

    // Field values on the grid, once.
    Eigen::MatrixXd v_grid(n_steps, n);
    for (int m = 0; m < n_steps; ++m) v_grid.row(m) = field(dt * m);

    Eigen::VectorXd products(n_samples);
    parallel_for_chunks(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            std::mt19937_64 gen = make_stream(seed, i);
            Eigen::VectorXd state = u0.coeffs();
            double delta = 0.0;
            for (int m = 0; m < n_steps; ++m) {
                const Eigen::VectorXd dw = sqrt_dt * normal_vector(gen, n);
                delta += v_grid.row(m).dot(dw);
                state += dt * (spec.lambdas().array() * state.array()).matrix() + q.sqrt_q() * dw;
            }
            products[static_cast<Eigen::Index>(i)] = h.coeffs().dot(state) * delta;
        }
    });

    IbpResult out;
    out.n_samples = n_samples;
    out.estimate = products.mean();
    const double var =
        (products.array() - out.estimate).square().sum() / static_cast<double>(n_samples - 1);
    out.stderr_mc = std::sqrt(var / n_samples);
    out.target = h.coeffs().dot(cov.project_range(h.coeffs()));
    out.z = (out.stderr_mc > 0.0) ? (out.estimate - out.target) / out.stderr_mc : 0.0;
    const double lam_max = spec.lambdas().cwiseAbs().maxCoeff();
    out.dt_band = (1.0 + lam_max * horizon) * dt * std::max(1.0, std::abs(out.target));
    return out;
}

PhiSpec PhiSpec::linear(Eigen::VectorXd a) {
    PhiSpec phi;
    phi.kind = Kind::linear;
    phi.a = std::move(a);
    return phi;
}

PhiSpec PhiSpec::quadratic(Eigen::MatrixXd b) {
    if (b.rows() != b.cols()) throw DimensionError("quadratic form matrix must be square");
    const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(b.cwiseAbs().maxCoeff(), kTiny))
        throw NotSymmetricError("quadratic form matrix must be symmetric");
    PhiSpec phi;
    phi.kind = Kind::quadratic;
    phi.b = std::move(b);
    return phi;
}

double PhiSpec::value(const Eigen::VectorXd& u) const {
    return kind == Kind::linear ? a.dot(u) : u.dot(b * u);
}

Eigen::VectorXd PhiSpec::gradient(const Eigen::VectorXd& u) const {
    return kind == Kind::linear ? a : Eigen::VectorXd(2.0 * (b * u));
}

ChainRuleResult chain_rule_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                 const PathRecord& path, const PhiSpec& phi, double r) {
    check_pair(spec, q);
    const Eigen::Index n = spec.n_modes();
    const Eigen::Index m_steps = path.increments.rows();
    if (path.increments.cols() != n) throw DimensionError("path does not match the spectrum");

    ChainRuleResult out;
    // Locate the increment cell containing r; off-grid r snaps to the
    // nearest cell and is reported as clamped.
    Eigen::Index cell = -1;
    if (r < path.times[0]) {
        cell = 0;
        out.r_clamped = true;
    } else if (r >= path.times[m_steps]) {
        cell = m_steps - 1;
        out.r_clamped = true;
    } else {
        for (Eigen::Index m = 0; m < m_steps; ++m) {
            if (r >= path.times[m] && r < path.times[m + 1]) {
                cell = m;
                break;
            }
        }
    }
    out.cell = static_cast<int>(cell);
    out.r_effective = path.times[cell];

    const double horizon = path.horizon();
    const Eigen::VectorXd u0 = path.states.row(0);
    const Eigen::VectorXd u_terminal =
        mild_terminal_from_increments(spec, q, u0, path.times, path.increments);

    // Adjoint route: (Q^{1/2})^T S(t - r)^T grad phi(u(t)).
    const Eigen::ArrayXd decay = spec.decay(horizon - out.r_effective);
    out.analytic =
        q.sqrt_q().transpose() * (decay * phi.gradient(u_terminal).array()).matrix();

    // Path-perturbation route through the same discretized solution map.
    const double eps = 1e-6 * std::max(1.0, path.increments.cwiseAbs().maxCoeff());
    out.finite_difference.resize(n);
    Eigen::MatrixXd bumped = path.increments;
    for (Eigen::Index j = 0; j < n; ++j) {
        bumped(cell, j) = path.increments(cell, j) + eps;
        const double up = phi.value(
            mild_terminal_from_increments(spec, q, u0, path.times, bumped));
        bumped(cell, j) = path.increments(cell, j) - eps;
        const double down = phi.value(
            mild_terminal_from_increments(spec, q, u0, path.times, bumped));
        bumped(cell, j) = path.increments(cell, j);
        out.finite_difference[j] = (up - down) / (2.0 * eps);
    }

    const double scale = std::max(out.analytic.cwiseAbs().maxCoeff(), kTiny);
    out.max_rel_error = (out.analytic - out.finite_difference).cwiseAbs().maxCoeff() / scale;
    return out;
}

Eigen::VectorXd dual_field_covering_value(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                          const Eigen::VectorXd& g) {
    check_pair(spec, q);
    if (g.size() != spec.n_modes()) throw DimensionError("direction does not match the spectrum");
    return gl_integrate_to_tolerance(
        [&](double r) -> Eigen::VectorXd {
            const Eigen::ArrayXd decay = spec.decay(t - r);
            const Eigen::VectorXd dual = q.sqrt_q().transpose() * (decay * g.array()).matrix();
            return (decay * (q.sqrt_q() * dual).array()).matrix();
        },
        0.0, t);
}

MinimalNormResult minimal_norm_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                     const MalliavinCov& cov, const HilbertState& h,
                                     std::mt19937_64& gen) {
    const CoveringField v_h = covering_field(spec, q, cov, h);
    const double t = cov.horizon();
    const Eigen::Index n = spec.n_modes();

    // Random candidate field z(r) = b0 + b1 r + b2 r^2 in noise coordinates.
    Eigen::MatrixXd poly(n, 3);
    for (int p = 0; p < 3; ++p) poly.col(p) = normal_vector(gen, n);
    auto z = [&](double r) -> Eigen::VectorXd { return poly.col(0) + r * poly.col(1) + r * r * poly.col(2); };

    // Pairing <Du, z> and the normal-equations projection onto {(Du)^* g}:
    // the Gram operator of (Du)^* is gamma itself, so g* = gamma^+ <Du, z>.
    const Eigen::VectorXd paired = gl_integrate_to_tolerance(
        [&](double r) -> Eigen::VectorXd {
            const Eigen::VectorXd noise = q.sqrt_q() * z(r);
            return (spec.decay(t - r) * noise.array()).matrix();
        },
        0.0, t);
    const Eigen::VectorXd g_star = cov.apply_pinv(paired);

    auto dual_of_g = [&](double r) -> Eigen::VectorXd {
        return q.sqrt_q().transpose() * (spec.decay(t - r) * g_star.array()).matrix();
    };
    auto w = [&](double r) -> Eigen::VectorXd { return z(r) - dual_of_g(r); };

    MinimalNormResult out;
    const Eigen::VectorXd pairing_w = gl_integrate_to_tolerance(
        [&](double r) -> Eigen::VectorXd {
            const Eigen::VectorXd noise = q.sqrt_q() * w(r);
            return (spec.decay(t - r) * noise.array()).matrix();
        },
        0.0, t);
    out.pairing_residual = pairing_w.norm() / (1.0 + paired.norm());

    out.vh_norm2 = gl_integrate_scalar_to_tolerance(
        [&](double r) { return v_h(r).squaredNorm(); }, 0.0, t);
    out.w_norm2 = gl_integrate_scalar_to_tolerance(
        [&](double r) { return w(r).squaredNorm(); }, 0.0, t);
    out.sum_norm2 = gl_integrate_scalar_to_tolerance(
        [&](double r) { return (v_h(r) + w(r)).squaredNorm(); }, 0.0, t);

    out.pythagoras_residual = std::abs(out.sum_norm2 - out.vh_norm2 - out.w_norm2) /
                              std::max(out.vh_norm2 + out.w_norm2, kTiny);
    out.minimal = out.sum_norm2 >= out.vh_norm2 * (1.0 - 1e-12);
    return out;
}

}  // namespace spdescore
