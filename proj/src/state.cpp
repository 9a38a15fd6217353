#include "spdescore/state.hpp"

#include <cmath>

#include "spdescore/errors.hpp"

namespace spdescore {

HilbertState::HilbertState(Eigen::VectorXd coeffs, std::uint64_t basis_id)
    : coeffs_(std::move(coeffs)), basis_id_(basis_id) {
    if (coeffs_.size() < 1) throw InvalidParameterError("state needs at least one coefficient");
    if (!coeffs_.allFinite()) throw InvalidParameterError("state coefficients must be finite");
}

GridFunction synthesize_on_grid(const HilbertState& state, int n_points, double length) {
    if (n_points < 2) throw InvalidParameterError("grid synthesis needs n_points >= 2");
    if (!(length > 0.0)) throw InvalidParameterError("domain length must be positive");

    const Eigen::Index n_modes = state.size();
    const double amp = std::sqrt(2.0 / length);

    GridFunction out;
    out.x.resize(n_points);
    out.value.setZero(n_points);
    for (int j = 1; j <= n_points; ++j) {
        const double x = length * static_cast<double>(j) / static_cast<double>(n_points + 1);
        out.x[j - 1] = x;
        double v = 0.0;
        for (Eigen::Index k = 0; k < n_modes; ++k) {
            v += state.coeffs()[k] * amp * std::sin(static_cast<double>(k + 1) * M_PI * x / length);
        }
        out.value[j - 1] = v;
    }
    return out;
}

}  // namespace spdescore
