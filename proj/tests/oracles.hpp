#pragma once

// Test-side oracles, independent of the production quadrature and closed
// forms: adaptive Simpson integration, plain statistics, and scalar
// reference formulas.

#include <cmath>
#include <functional>

#include <Eigen/Core>

namespace oracles {

// Recursive adaptive Simpson for scalar integrands.
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-14, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Entrywise adaptive Simpson for matrix-valued integrands.
inline Eigen::MatrixXd adaptive_simpson_matrix(
    const std::function<Eigen::MatrixXd(double)>& f, double a, double b, double tol = 1e-14) {
    const Eigen::MatrixXd probe = f(a);
    Eigen::MatrixXd out(probe.rows(), probe.cols());
    for (Eigen::Index i = 0; i < probe.rows(); ++i)
        for (Eigen::Index j = 0; j < probe.cols(); ++j)
            out(i, j) = adaptive_simpson([&](double s) { return f(s)(i, j); }, a, b, tol);
    return out;
}

struct Moments {
    double mean = 0.0;
    double stderr_mean = 0.0;
    double variance = 0.0;
    double stderr_variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

inline Moments moments(const Eigen::VectorXd& samples) {
    Moments out;
    const auto n = static_cast<double>(samples.size());
    out.mean = samples.mean();
    const Eigen::ArrayXd centered = samples.array() - out.mean;
    out.variance = centered.square().sum() / (n - 1.0);
    out.stderr_mean = std::sqrt(out.variance / n);
    const double m2 = centered.square().sum() / n;
    const double m3 = centered.cube().sum() / n;
    const double m4 = centered.pow(4).sum() / n;
    out.stderr_variance = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    out.skewness = m3 / std::pow(m2, 1.5);
    out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return out;
}

// Coarsen fine Brownian increments by summing blocks of `factor` rows;
// shares one Brownian path across Euler resolutions.
inline Eigen::MatrixXd coarsen_increments(const Eigen::MatrixXd& fine, int factor) {
    const Eigen::Index coarse_rows = fine.rows() / factor;
    Eigen::MatrixXd coarse = Eigen::MatrixXd::Zero(coarse_rows, fine.cols());
    for (Eigen::Index m = 0; m < coarse_rows; ++m)
        for (int k = 0; k < factor; ++k) coarse.row(m) += fine.row(m * factor + k);
    return coarse;
}

}  // namespace oracles
