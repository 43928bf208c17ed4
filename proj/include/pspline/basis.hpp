#pragma once

// Clamped B-spline bases and the integrated squared-derivative penalty.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace pspline {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed interval [lo, hi] on which a basis is defined.
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double x) const { return x >= lo && x <= hi; }
    double width() const { return hi - lo; }
};

/// Knot layout of a clamped B-spline basis of order k (degree k-1).
///
/// The full knot sequence is lo repeated k times, the interior knots, then hi
/// repeated k times, so the basis has interior().size() + k functions.
class KnotVector {
public:
    KnotVector(Interval domain, std::vector<double> interior, int order)
        : domain_(domain), interior_(std::move(interior)), order_(order) {
        detail::require(domain_.lo < domain_.hi, "KnotVector: invalid domain (lo must be < hi)");
        detail::require(order_ >= 2, "KnotVector: order must be >= 2");
        for (std::size_t j = 0; j < interior_.size(); ++j) {
            detail::require(interior_[j] > domain_.lo && interior_[j] < domain_.hi,
                            "KnotVector: interior knot " + std::to_string(j) + " outside the open domain");
            detail::require(j == 0 || interior_[j] > interior_[j - 1],
                            "KnotVector: interior knots must be strictly increasing");
        }
        full_.reserve(interior_.size() + 2 * static_cast<std::size_t>(order_));
        full_.insert(full_.end(), static_cast<std::size_t>(order_), domain_.lo);
        full_.insert(full_.end(), interior_.begin(), interior_.end());
        full_.insert(full_.end(), static_cast<std::size_t>(order_), domain_.hi);
    }

    const Interval& domain() const { return domain_; }
    const std::vector<double>& interior() const { return interior_; }
    const std::vector<double>& full() const { return full_; }
    int order() const { return order_; }
    int num_basis() const { return static_cast<int>(interior_.size()) + order_; }

    /// Distinct breakpoints lo, interior..., hi.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        out.reserve(interior_.size() + 2);
        out.push_back(domain_.lo);
        out.insert(out.end(), interior_.begin(), interior_.end());
        out.push_back(domain_.hi);
        return out;
    }

    /// Index mu into full() with full[mu] <= x < full[mu+1]; x == hi maps to the last
    /// non-degenerate span so the rightmost basis function is left-continuous.
    int span(double x) const {
        const int last = num_basis() - 1;
        if (x >= domain_.hi) return last;
        const auto first = full_.begin() + order_ - 1;
        const auto end = full_.begin() + last + 1;
        return static_cast<int>(std::upper_bound(first, end, x) - full_.begin()) - 1;
    }

private:
    Interval domain_;
    std::vector<double> interior_;
    int order_;
    std::vector<double> full_;
};

/// Equally spaced interior knots a + j(b-a)/(n_interior+1), j = 1..n_interior.
inline KnotVector make_knots(Interval domain, int n_interior, int order) {
    detail::require(domain.lo < domain.hi, "make_knots: invalid domain (lo must be < hi)");
    detail::require(n_interior >= 1, "make_knots: need at least one interior knot");
    detail::require(order >= 2, "make_knots: order must be >= 2");
    std::vector<double> interior(static_cast<std::size_t>(n_interior));
    const double step = domain.width() / (n_interior + 1);
    for (int j = 1; j <= n_interior; ++j) interior[static_cast<std::size_t>(j - 1)] = domain.lo + j * step;
    return KnotVector(domain, std::move(interior), order);
}

/// Variant that reads the knot count as the total number of distinct
/// breakpoints including both ends.
inline KnotVector make_knots_total(Interval domain, int n_total, int order) {
    detail::require(n_total >= 3, "make_knots_total: need at least three breakpoints");
    return make_knots(domain, n_total - 2, order);
}

namespace detail {

// Nonzero basis values and derivatives on span mu, following de Boor's
// triangular scheme.  ders(d, r) is the d-th derivative of B_{mu-k+1+r}.
inline Matrix local_basis_derivatives(const KnotVector& knots, double x, int mu, int max_deriv) {
    const int k = knots.order();
    const auto& t = knots.full();
    const int degree = k - 1;
    Matrix ndu(k, k);
    std::vector<double> left(static_cast<std::size_t>(k)), right(static_cast<std::size_t>(k));
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = x - t[mu + 1 - j];
        right[j] = t[mu + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double tmp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        ndu(j, j) = saved;
    }

    Matrix ders = Matrix::Zero(max_deriv + 1, k);
    for (int r = 0; r < k; ++r) ders(0, r) = ndu(r, degree);

    Matrix a(2, k);
    for (int r = 0; r <= degree; ++r) {
        int s1 = 0, s2 = 1;
        a.setZero();
        a(0, 0) = 1.0;
        for (int d = 1; d <= max_deriv; ++d) {
            double value = 0.0;
            const int rk = r - d;
            const int pk = degree - d;
            if (r >= d) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                value = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? d - 1 : degree - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                value += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, d) = -a(s1, d - 1) / ndu(pk + 1, r);
                value += a(s2, d) * ndu(r, pk);
            }
            ders(d, r) = value;
            std::swap(s1, s2);
        }
    }
    double factor = degree;
    for (int d = 1; d <= max_deriv; ++d) {
        ders.row(d) *= factor;
        factor *= degree - d;
    }
    return ders;
}

}  // namespace detail

/// B(x) or its d-th derivative, d in {0, ..., k-1}; entries outside the local
/// support are exactly zero.
inline Vector eval_basis(const KnotVector& knots, double x, int deriv = 0) {
    detail::require(knots.domain().contains(x), "eval_basis: x = " + std::to_string(x) + " outside the domain");
    detail::require(deriv >= 0 && deriv < knots.order(), "eval_basis: derivative order must be in [0, k)");
    const int k = knots.order();
    const int mu = knots.span(x);
    const Matrix local = detail::local_basis_derivatives(knots, x, mu, deriv);
    Vector out = Vector::Zero(knots.num_basis());
    for (int r = 0; r < k; ++r) out[mu - k + 1 + r] = local(deriv, r);
    return out;
}

/// Design matrix with row i equal to B(x_i)^T.
inline Matrix build_design(const KnotVector& knots, std::span<const double> xs) {
    Matrix X = Matrix::Zero(static_cast<Eigen::Index>(xs.size()), knots.num_basis());
    const int k = knots.order();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!knots.domain().contains(xs[i])) {
            throw InvalidArgument("build_design: point " + std::to_string(i) + " (x = " + std::to_string(xs[i]) +
                                  ") outside the domain");
        }
        const int mu = knots.span(xs[i]);
        const Matrix local = detail::local_basis_derivatives(knots, xs[i], mu, 0);
        for (int r = 0; r < k; ++r) X(static_cast<Eigen::Index>(i), mu - k + 1 + r) = local(0, r);
    }
    return X;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int points) {
    detail::require(points >= 1, "gauss_legendre: need at least one point");
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(points));
    rule.weights.resize(static_cast<std::size_t>(points));
    const double pi = std::acos(-1.0);
    for (int i = 0; i < points; ++i) {
        double z = std::cos(pi * (i + 0.75) / (points + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= points; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = points * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::fabs(dz) < 1e-16) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = -z;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return rule;
}

/// Penalty matrix D_ij = integral of B_i''(x) B_j''(x) over the domain,
/// together with the spectral facts REML needs.
struct Penalty {
    Matrix D;
    int null_dim = 0;       ///< dimension of ker D
    double log_pdet = 0.0;  ///< log of the product of the nonzero eigenvalues
    Matrix eigenvectors;    ///< orthonormal, columns ordered by ascending eigenvalue
    Vector eigenvalues;     ///< null-space eigenvalues stored as exact zeros
};

namespace detail {

inline void penalty_spectrum(Penalty& pen) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(pen.D);
    pen.eigenvectors = eig.eigenvectors();
    pen.eigenvalues = eig.eigenvalues();
    const double tol = std::max(1e-300, pen.eigenvalues.cwiseAbs().maxCoeff()) * 1e-10;
    pen.null_dim = 0;
    pen.log_pdet = 0.0;
    for (Eigen::Index i = 0; i < pen.eigenvalues.size(); ++i) {
        if (pen.eigenvalues[i] <= tol) {
            ++pen.null_dim;
            pen.eigenvalues[i] = 0.0;
        } else {
            pen.log_pdet += std::log(pen.eigenvalues[i]);
        }
    }
}

}  // namespace detail

/// Integrated squared second-derivative penalty.  gauss_points = 0 selects
/// k - 2 points per knot interval, which integrates the piecewise polynomial
/// integrand exactly (2 points for cubic splines).  Piecewise-linear bases
/// (k = 2) have zero second derivative between knots and get D = 0.
inline Penalty build_penalty(const KnotVector& knots, int gauss_points = 0) {
    const int k = knots.order();
    const int p = knots.num_basis();
    Penalty pen;
    pen.D = Matrix::Zero(p, p);
    if (k == 2) {
        pen.null_dim = p;
        pen.eigenvectors = Matrix::Identity(p, p);
        pen.eigenvalues = Vector::Zero(p);
        return pen;
    }
    if (gauss_points == 0) gauss_points = std::max(2, k - 2);
    const GaussRule rule = gauss_legendre(gauss_points);
    const std::vector<double> breaks = knots.breakpoints();
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double lo = breaks[s], hi = breaks[s + 1];
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double x = mid + half * rule.nodes[q];
            const int mu = knots.span(x);
            const Matrix local = detail::local_basis_derivatives(knots, x, mu, 2);
            const double w = half * rule.weights[q];
            const int first = mu - k + 1;
            for (int r = 0; r < k; ++r) {
                for (int c = 0; c < k; ++c) pen.D(first + r, first + c) += w * local(2, r) * local(2, c);
            }
        }
    }
    detail::penalty_spectrum(pen);
    return pen;
}

/// beta^T D beta evaluated in the eigenbasis, so null-space components
/// contribute exactly zero.
inline double penalty_value(const Penalty& pen, const Vector& beta) {
    const Vector c = pen.eigenvectors.transpose() * beta;
    return c.cwiseAbs2().dot(pen.eigenvalues);
}

/// Wraps an arbitrary symmetric positive semidefinite penalty matrix.
inline Penalty make_penalty(Matrix D) {
    detail::require(D.rows() == D.cols(), "make_penalty: D must be square");
    Penalty pen;
    pen.D = std::move(D);
    detail::penalty_spectrum(pen);
    return pen;
}

}  // namespace pspline
