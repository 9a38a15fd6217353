#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace spdescore {

/// Element of the truncated Hilbert space: coefficients in the sine eigenbasis
/// of its spectrum, stamped with that spectrum's basis fingerprint.
class HilbertState {
public:
    HilbertState(Eigen::VectorXd coeffs, std::uint64_t basis_id);

    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    std::uint64_t basis_id() const { return basis_id_; }
    Eigen::Index size() const { return coeffs_.size(); }
    double norm() const { return coeffs_.norm(); }

private:
    Eigen::VectorXd coeffs_;
    std::uint64_t basis_id_;
};

struct GridFunction {
    Eigen::VectorXd x;
    Eigen::VectorXd value;
};

/// Evaluate the state on the uniform interior grid x_j = j L / (n_points + 1),
/// j = 1..n_points, in the Dirichlet sine basis sqrt(2/L) sin(k pi x / L).
GridFunction synthesize_on_grid(const HilbertState& state, int n_points, double length);

}  // namespace spdescore
