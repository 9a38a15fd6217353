#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "spdescore/covariance_op.hpp"
#include "spdescore/forward.hpp"
#include "spdescore/spectrum.hpp"
#include "spdescore/state.hpp"

namespace spdescore {

/// Malliavin covariance operator of the solution at a fixed horizon, with its
/// eigendecomposition and thresholded Moore-Penrose pseudoinverse cached.
/// Eigenvalues are retained when mu_i > pinv_threshold * mu_max.
class MalliavinCov {
public:
    MalliavinCov(Eigen::MatrixXd gamma, double horizon, double pinv_threshold = 1e-12);

    const Eigen::MatrixXd& gamma() const { return gamma_; }
    double horizon() const { return horizon_; }
    double pinv_threshold() const { return pinv_threshold_; }
    Eigen::Index n_modes() const { return gamma_.rows(); }

    const Eigen::VectorXd& eigenvalues() const { return eigvals_; }
    const Eigen::MatrixXd& eigenvectors() const { return eigvecs_; }
    int rank() const { return rank_; }
    double trace() const { return eigvals_.sum(); }

    const Eigen::MatrixXd& pinv() const { return pinv_; }
    const Eigen::MatrixXd& range_projection() const { return projection_; }
    Eigen::MatrixXd sqrt() const;

    Eigen::VectorXd apply_pinv(const Eigen::VectorXd& v) const { return pinv_ * v; }
    Eigen::VectorXd project_range(const Eigen::VectorXd& v) const { return projection_ * v; }

    /// Relative size of the component of v outside the retained range.
    double out_of_range_fraction(const Eigen::VectorXd& v) const;

private:
    Eigen::MatrixXd gamma_;
    double horizon_;
    double pinv_threshold_;
    Eigen::VectorXd eigvals_;
    Eigen::MatrixXd eigvecs_;
    Eigen::MatrixXd pinv_;
    Eigen::MatrixXd projection_;
    int rank_ = 0;
};

/// Closed form of the covariance operator: gamma_ij = Q_ij * g(lambda_i +
/// lambda_j, t) with g(mu, t) the integral of e^{mu s} over [0, t].
MalliavinCov malliavin_covariance(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                  double pinv_threshold = 1e-12);

/// Spec surface for the pseudoinverse of a covariance operator.
Eigen::MatrixXd pseudoinverse(const MalliavinCov& cov);

/// Max relative entry error of gamma(t+s) - gamma(t) - S(t) gamma(s) S(t)^*.
double covariance_recursion_residual(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                     double s);

/// D_r u(t) = S(t-r) Q^{1/2} on [0, t], the zero operator outside.
Eigen::MatrixXd malliavin_derivative(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                     double r);

/// Noise-space field r |-> (Q^{1/2})^T S(t-r)^T gamma^+ h on [0, t], zero
/// outside. Deterministic in r; carries a flag when h has a material
/// component outside the closed range of gamma.
class CoveringField {
public:
    CoveringField(Eigen::VectorXd lambdas, Eigen::MatrixXd sqrt_q_t, Eigen::VectorXd weighted,
                  Eigen::VectorXd h, double horizon, bool out_of_range);

    Eigen::VectorXd operator()(double r) const;
    double horizon() const { return horizon_; }
    Eigen::Index n_modes() const { return lambdas_.size(); }
    const Eigen::VectorXd& direction() const { return h_; }
    const Eigen::VectorXd& weighted_direction() const { return weighted_; }  // gamma^+ h
    bool out_of_range() const { return out_of_range_; }

private:
    Eigen::VectorXd lambdas_;
    Eigen::MatrixXd sqrt_q_t_;
    Eigen::VectorXd weighted_;
    Eigen::VectorXd h_;
    double horizon_;
    bool out_of_range_;
};

CoveringField covering_field(const ModeSpectrum& spec, const TraceClassQ& q,
                             const MalliavinCov& cov, const HilbertState& h);

/// Both routes to the covering pairing <Du(t), v_h>: the closed form
/// gamma gamma^+ h and Gauss-Legendre quadrature of the integrand, each
/// compared against the range projection of h.
struct CoveringCheckResult {
    Eigen::VectorXd closed_form;
    Eigen::VectorXd quadrature;
    Eigen::VectorXd projected_h;
    double residual_closed = 0.0;
    double residual_quadrature = 0.0;
};

CoveringCheckResult covering_property_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                            const MalliavinCov& cov, const HilbertState& h);

/// Left-point Ito sum of <v_h(t_m), dW_m> over the path grid. For the
/// deterministic fields here this is also the Skorokhod integral.
double skorokhod_integral(const CoveringField& field, const PathRecord& path);

/// Monte Carlo check of E[<u(T), h> delta(v_h)] = <h, Pi h> over EM paths.
struct IbpResult {
    double estimate = 0.0;
    double target = 0.0;
    double stderr_mc = 0.0;
    double z = 0.0;
    /// First-order discretization allowance (1 + max|lambda| T) dt max(1, |target|).
    double dt_band = 0.0;
    int n_samples = 0;
};

IbpResult ibp_duality_check(const ModeSpectrum& spec, const TraceClassQ& q, const HilbertState& u0,
                            const HilbertState& h, double horizon, int n_samples, int n_steps,
                            std::uint64_t seed);

/// Linear phi(u) = <a, u> or quadratic phi(u) = <u, B u> test functional.
struct PhiSpec {
    enum class Kind { linear, quadratic };
    Kind kind;
    Eigen::VectorXd a;
    Eigen::MatrixXd b;

    static PhiSpec linear(Eigen::VectorXd a);
    static PhiSpec quadratic(Eigen::MatrixXd b);

    double value(const Eigen::VectorXd& u) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
};

/// Chain-rule check at perturbation time r: the adjoint composition
/// (Q^{1/2})^T S(t-r)^T grad phi(u(t)) against a central finite difference of
/// phi through the discretized solution map, perturbing the increment of the
/// grid cell containing r. Off-grid r snaps to the nearest cell (reported).
struct ChainRuleResult {
    Eigen::VectorXd analytic;
    Eigen::VectorXd finite_difference;
    double max_rel_error = 0.0;
    double r_effective = 0.0;
    int cell = 0;
    bool r_clamped = false;
};

ChainRuleResult chain_rule_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                 const PathRecord& path, const PhiSpec& phi, double r);

/// Minimal-norm structure of the covering solution set: draws a random field,
/// projects out its component along {(Du)^* g}, and checks that the remainder
/// pairs to zero with Du and satisfies the Pythagoras identity against v_h.
struct MinimalNormResult {
    double vh_norm2 = 0.0;
    double w_norm2 = 0.0;
    double sum_norm2 = 0.0;
    double pythagoras_residual = 0.0;
    double pairing_residual = 0.0;
    bool minimal = true;  // ||v_h + w|| >= ||v_h||
};

MinimalNormResult minimal_norm_check(const ModeSpectrum& spec, const TraceClassQ& q,
                                     const MalliavinCov& cov, const HilbertState& h,
                                     std::mt19937_64& gen);

/// Quadrature of <Du(t), (Du)^* g>; equals gamma g for every g.
Eigen::VectorXd dual_field_covering_value(const ModeSpectrum& spec, const TraceClassQ& q, double t,
                                          const Eigen::VectorXd& g);

}  // namespace spdescore
