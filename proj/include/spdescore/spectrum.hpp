#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "spdescore/state.hpp"

namespace spdescore {

/// Integral of e^{mu s} over [0, t]. Switches to the two-term series for
/// |mu t| < 1e-8 where expm1/mu would cancel.
inline double integrated_exp(double mu, double t) {
    const double x = mu * t;
    if (std::abs(x) < 1e-8) return t * (1.0 + 0.5 * x);
    return std::expm1(x) / mu;
}

/// Eigenvalues of the drift operator in its diagonalizing sine basis. The
/// semigroup acts mode-wise as e^{lambda_k t}; the growth bound is max_k
/// lambda_k with stability constant 1 (self-adjoint diagonal case).
class ModeSpectrum {
public:
    explicit ModeSpectrum(Eigen::VectorXd lambdas);

    Eigen::Index n_modes() const { return lambdas_.size(); }
    const Eigen::VectorXd& lambdas() const { return lambdas_; }
    double growth_bound() const { return growth_bound_; }
    double stability_constant() const { return 1.0; }

    /// Fingerprint of the eigenvalue sequence; states carry it so that
    /// cross-basis mixups surface as dimension errors.
    std::uint64_t basis_id() const { return basis_id_; }

    HilbertState state(Eigen::VectorXd coeffs) const;
    HilbertState state(std::initializer_list<double> coeffs) const;
    HilbertState zero_state() const;

    /// e^{lambda_k t} for every mode.
    Eigen::ArrayXd decay(double t) const { return (lambdas_.array() * t).exp(); }

private:
    Eigen::VectorXd lambdas_;
    double growth_bound_;
    std::uint64_t basis_id_;
};

/// Dirichlet Laplacian spectrum on (0, L): lambda_k = -nu (k pi / L)^2 in the
/// basis sqrt(2/L) sin(k pi x / L), k = 1..n_modes.
ModeSpectrum make_dirichlet_laplacian(int n_modes, double length, double diffusivity);

/// Apply S(t) mode-wise. Negative t is rejected unless allow_group is set
/// (the drift generates a group at finite truncation, so S(-t) is available
/// on request).
HilbertState semigroup_apply(const ModeSpectrum& spec, double t, const HilbertState& v,
                             bool allow_group = false);

}  // namespace spdescore
