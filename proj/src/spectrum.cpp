#include "spdescore/spectrum.hpp"

#include "spdescore/errors.hpp"
#include "spdescore/rng.hpp"

namespace spdescore {

ModeSpectrum::ModeSpectrum(Eigen::VectorXd lambdas) : lambdas_(std::move(lambdas)) {
    if (lambdas_.size() < 1) throw InvalidParameterError("spectrum needs at least one mode");
    if (!lambdas_.allFinite()) throw InvalidParameterError("drift eigenvalues must be finite");
    growth_bound_ = lambdas_.maxCoeff();
    basis_id_ = fnv1a(lambdas_.data(), sizeof(double) * static_cast<std::size_t>(lambdas_.size()));
}

HilbertState ModeSpectrum::state(Eigen::VectorXd coeffs) const {
    if (coeffs.size() != lambdas_.size())
        throw DimensionError("coefficient count does not match the mode count");
    return HilbertState(std::move(coeffs), basis_id_);
}

HilbertState ModeSpectrum::state(std::initializer_list<double> coeffs) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs.size()));
    Eigen::Index i = 0;
    for (double c : coeffs) v[i++] = c;
    return state(std::move(v));
}

HilbertState ModeSpectrum::zero_state() const {
    return HilbertState(Eigen::VectorXd::Zero(lambdas_.size()), basis_id_);
}

ModeSpectrum make_dirichlet_laplacian(int n_modes, double length, double diffusivity) {
    if (n_modes < 1) throw InvalidParameterError("n_modes must be >= 1");
    if (!(length > 0.0)) throw InvalidParameterError("domain length must be positive");
    if (!(diffusivity > 0.0)) throw InvalidParameterError("diffusivity must be positive");

    Eigen::VectorXd lambdas(n_modes);
    for (int k = 1; k <= n_modes; ++k) {
        const double wave = static_cast<double>(k) * M_PI / length;
        lambdas[k - 1] = -diffusivity * wave * wave;
    }
    return ModeSpectrum(std::move(lambdas));
}

HilbertState semigroup_apply(const ModeSpectrum& spec, double t, const HilbertState& v,
                             bool allow_group) {
    if (v.basis_id() != spec.basis_id() || v.size() != spec.n_modes())
        throw DimensionError("state basis does not match the spectrum");
    if (t < 0.0 && !allow_group)
        throw InvalidParameterError("negative time requires the group flag");
    return HilbertState((spec.decay(t) * v.coeffs().array()).matrix(), spec.basis_id());
}

}  // namespace spdescore
