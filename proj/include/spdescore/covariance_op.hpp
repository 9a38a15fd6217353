#pragma once

#include <Eigen/Core>

#include "spdescore/spectrum.hpp"

namespace spdescore {

/// Symmetric PSD noise covariance in the truncated basis, with its symmetric
/// square root cached. Eigenvalues within -1e-12 * lambda_max of zero are
/// clamped to zero; anything lower is rejected.
class TraceClassQ {
public:
    Eigen::Index n_modes() const { return q_.rows(); }
    const Eigen::MatrixXd& q() const { return q_; }
    const Eigen::MatrixXd& sqrt_q() const { return sqrt_q_; }
    double trace() const { return trace_; }

    friend TraceClassQ make_dense_q(Eigen::MatrixXd q);
    friend TraceClassQ make_power_law_q(int n_modes, double amplitude, double decay);

private:
    TraceClassQ(Eigen::MatrixXd q, Eigen::MatrixXd sqrt_q, double trace)
        : q_(std::move(q)), sqrt_q_(std::move(sqrt_q)), trace_(trace) {}

    Eigen::MatrixXd q_;
    Eigen::MatrixXd sqrt_q_;
    double trace_;
};

/// Diagonal q_kk = amplitude * k^{-decay}. decay must exceed 1 so the trace
/// stays bounded as the truncation grows.
TraceClassQ make_power_law_q(int n_modes, double amplitude, double decay);

/// General symmetric PSD covariance; the square root comes from the symmetric
/// eigendecomposition V diag(sqrt(mu)) V^T.
TraceClassQ make_dense_q(Eigen::MatrixXd q);

/// Covariance of the stochastic convolution over [0, t]:
/// Sigma_ij = Q_ij * integral of e^{(lambda_i + lambda_j) s} ds.
Eigen::MatrixXd stochastic_convolution_covariance(const ModeSpectrum& spec, const TraceClassQ& q,
                                                  double t);

/// Integral of the squared HS norm of S(s) Q^{1/2} over [0, t], summed as
/// sum_ij (Q^{1/2})_ij^2 * integral of e^{2 lambda_i s} ds. Equals the trace
/// of the covariance above; the two routes are kept separate on purpose.
double hs_condition_value(const ModeSpectrum& spec, const TraceClassQ& q, double t);

}  // namespace spdescore
