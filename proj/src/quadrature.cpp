#include "spdescore/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "spdescore/errors.hpp"

namespace spdescore {

namespace {
GaussLegendre compute_gauss_legendre(int n) {
    // Jacobi matrix of the Legendre recurrence; eigenvalues are the nodes and
    // the squared first eigenvector components give the weights.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = static_cast<double>(k) / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussLegendre rule;
    rule.nodes = es.eigenvalues();
    rule.weights = 2.0 * es.eigenvectors().row(0).array().square();
    return rule;
}
}  // namespace

const GaussLegendre& gauss_legendre(int n) {
    if (n < 1) throw InvalidParameterError("quadrature order must be >= 1");
    static std::map<int, GaussLegendre> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

}  // namespace spdescore
