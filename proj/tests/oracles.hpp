#pragma once

// Reference implementations used only by the tests.  They are written from
// the textbook definitions and share no code with the library.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Cox-de Boor recursion for B_{i,k} on the full knot sequence t, with the
/// right end of the domain assigned to the last nonzero-width interval.
inline double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
    if (k == 1) {
        const double lo = t[i], hi = t[i + 1];
        if (lo == hi) return 0.0;
        if (x >= lo && x < hi) return 1.0;
        // x == b belongs to the last non-degenerate interval
        if (x == t.back() && hi == t.back()) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    const double d1 = t[i + k - 1] - t[i];
    const double d2 = t[i + k] - t[i + 1];
    if (d1 > 0.0) left = (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x);
    if (d2 > 0.0) right = (t[i + k] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x);
    return left + right;
}

/// d-th derivative of B_{i,k} from the standard derivative recurrence.
inline double cox_de_boor_deriv(const std::vector<double>& t, int i, int k, double x, int d) {
    if (d == 0) return cox_de_boor(t, i, k, x);
    double out = 0.0;
    const double d1 = t[i + k - 1] - t[i];
    const double d2 = t[i + k] - t[i + 1];
    if (d1 > 0.0) out += (k - 1) / d1 * cox_de_boor_deriv(t, i, k - 1, x, d - 1);
    if (d2 > 0.0) out -= (k - 1) / d2 * cox_de_boor_deriv(t, i + 1, k - 1, x, d - 1);
    return out;
}

/// Composite Simpson's rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// beta minimizing ||y - X beta||^2 + alpha beta^T D beta via an SVD of the
/// augmented least-squares system [X; sqrt(alpha) R] with D = R^T R.
inline Eigen::VectorXd penalized_ls_svd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                                        double alpha) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
    const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd R = ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    Eigen::MatrixXd aug(X.rows() + R.rows(), X.cols());
    aug << X, std::sqrt(alpha) * R;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(aug.rows());
    rhs.head(y.size()) = y;
    return aug.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

/// Simple linear regression coefficients (intercept, slope).
inline std::pair<double, double> simple_regression(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {(sy - slope * sx) / n, slope};
}

}  // namespace oracle
