#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace spdescore {

/// Gauss-Legendre nodes/weights on [-1, 1], computed once per order via the
/// Golub-Welsch eigenproblem and cached.
struct GaussLegendre {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

const GaussLegendre& gauss_legendre(int n);

/// Integrate a smooth R^m- or matrix-valued integrand over [a, b] with an
/// n-point Gauss-Legendre rule.
template <typename F>
auto gl_integrate(F&& f, double a, double b, int n) {
    const GaussLegendre& rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    auto acc = (rule.weights[0] * f(mid + half * rule.nodes[0])).eval();
    for (int i = 1; i < n; ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return (half * acc).eval();
}

/// Gauss-Legendre with order doubling (64, 128, ...) until two successive
/// results agree to `tol` relative in the max norm. Integrands here are
/// products of exponentials and low-order polynomials, so this converges in
/// one or two doublings.
template <typename F>
auto gl_integrate_to_tolerance(F&& f, double a, double b, double tol = 1e-13, int n0 = 64,
                               int n_max = 512) {
    auto prev = gl_integrate(f, a, b, n0);
    if (a == b) return prev;
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        auto next = gl_integrate(f, a, b, n);
        const double diff = (next - prev).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
        prev = next;
        if (diff <= tol * scale) break;
    }
    return prev;
}

template <typename F>
double gl_integrate_scalar(F&& f, double a, double b, int n) {
    const GaussLegendre& rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * acc;
}

template <typename F>
double gl_integrate_scalar_to_tolerance(F&& f, double a, double b, double tol = 1e-13, int n0 = 64,
                                        int n_max = 512) {
    double prev = gl_integrate_scalar(f, a, b, n0);
    if (a == b) return prev;
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        const double next = gl_integrate_scalar(f, a, b, n);
        const double diff = std::abs(next - prev);
        prev = next;
        if (diff <= tol * std::max(1.0, std::abs(next))) break;
    }
    return prev;
}

}  // namespace spdescore
