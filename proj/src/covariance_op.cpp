#include "spdescore/covariance_op.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "spdescore/errors.hpp"

namespace spdescore {

namespace {
constexpr double kSymTol = 1e-12;
constexpr double kPsdTol = 1e-12;
}  // namespace

TraceClassQ make_power_law_q(int n_modes, double amplitude, double decay) {
    if (n_modes < 1) throw InvalidParameterError("n_modes must be >= 1");
    if (!(amplitude > 0.0)) throw InvalidParameterError("amplitude must be positive");
    if (!(decay > 1.0))
        throw TraceClassError("power-law decay must exceed 1 for a trace-class covariance");

    Eigen::VectorXd diag(n_modes);
    for (int k = 1; k <= n_modes; ++k)
        diag[k - 1] = amplitude * std::pow(static_cast<double>(k), -decay);

    return TraceClassQ(diag.asDiagonal(), diag.cwiseSqrt().asDiagonal(), diag.sum());
}

TraceClassQ make_dense_q(Eigen::MatrixXd q) {
    if (q.rows() < 1 || q.rows() != q.cols())
        throw DimensionError("covariance matrix must be square and non-empty");
    if (!q.allFinite()) throw InvalidParameterError("covariance entries must be finite");

    const double scale = q.cwiseAbs().maxCoeff();
    const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymTol * std::max(scale, 1e-300))
        throw NotSymmetricError("covariance matrix is not symmetric within tolerance");

    Eigen::MatrixXd sym = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NotPsdError("eigendecomposition of Q failed");

    Eigen::VectorXd mu = es.eigenvalues();
    const double mu_max = mu.maxCoeff();
    const double clamp = -kPsdTol * std::max(mu_max, 0.0);
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu[i] < clamp) throw NotPsdError("covariance matrix has a negative eigenvalue");
        if (mu[i] < 0.0) mu[i] = 0.0;
    }

    Eigen::MatrixXd sqrt_q =
        es.eigenvectors() * mu.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return TraceClassQ(std::move(sym), std::move(sqrt_q), mu.sum());
}

Eigen::MatrixXd stochastic_convolution_covariance(const ModeSpectrum& spec, const TraceClassQ& q,
                                                  double t) {
    if (q.n_modes() != spec.n_modes())
        throw DimensionError("covariance dimension does not match the spectrum");
    if (t < 0.0) throw InvalidParameterError("time must be non-negative");

    const Eigen::Index n = spec.n_modes();
    const Eigen::VectorXd& lam = spec.lambdas();
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            sigma(i, j) = q.q()(i, j) * integrated_exp(lam[i] + lam[j], t);
    return sigma;
}

double hs_condition_value(const ModeSpectrum& spec, const TraceClassQ& q, double t) {
    if (q.n_modes() != spec.n_modes())
        throw DimensionError("covariance dimension does not match the spectrum");
    if (t < 0.0) throw InvalidParameterError("time must be non-negative");

    const Eigen::Index n = spec.n_modes();
    const Eigen::VectorXd& lam = spec.lambdas();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) row += q.sqrt_q()(i, j) * q.sqrt_q()(i, j);
        total += row * integrated_exp(2.0 * lam[i], t);
    }
    return total;
}

}  // namespace spdescore
