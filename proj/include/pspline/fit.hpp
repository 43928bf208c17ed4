#pragma once

// Penalized least squares, REML smoothing-parameter selection and noise
// variance estimation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "basis.hpp"
#include "error.hpp"

namespace pspline {

/// Observed scatterplot (x_i, y_i), i = 1..n.
struct Dataset {
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t size() const { return xs.size(); }

    void validate(const Interval& domain) const {
        detail::require(xs.size() == ys.size(), "Dataset: xs and ys differ in length");
        detail::require(!xs.empty(), "Dataset: empty");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!domain.contains(xs[i])) {
                throw InvalidArgument("Dataset: x[" + std::to_string(i) + "] = " + std::to_string(xs[i]) +
                                      " outside the model domain");
            }
        }
    }
};

/// Everything about the regression that does not depend on y.
struct SplineModel {
    KnotVector knots;
    std::vector<double> xs;
    Matrix X;
    Penalty penalty;
    Matrix XtX;

    SplineModel(KnotVector k, std::span<const double> points)
        : knots(std::move(k)), xs(points.begin(), points.end()), X(build_design(knots, xs)), penalty(build_penalty(knots)), XtX(X.transpose() * X) {}

    int n() const { return static_cast<int>(X.rows()); }
    int p() const { return static_cast<int>(X.cols()); }
    const Matrix& D() const { return penalty.D; }
};

/// Factorization of A = X^T X + alpha D.
///
/// A is factored in the eigenbasis U of D as U^T X^T X U + alpha diag(lambda),
/// with null eigenvalues exactly zero, after symmetric diagonal scaling.  The
/// scaled matrix stays well conditioned as alpha grows, so fits near the
/// alpha -> infinity limit keep their null-space component accurate.
class PenalizedSystem {
public:
    PenalizedSystem(const Matrix& XtX, const Penalty& pen, double alpha) : alpha_(alpha), U_(&pen.eigenvectors) {
        detail::require(alpha >= 0.0 && std::isfinite(alpha), "penalized system: alpha must be finite and >= 0");
        detail::require(XtX.rows() == pen.D.rows(), "penalized system: X^T X and D differ in size");
        Matrix B = U_->transpose() * XtX * *U_;
        B.diagonal() += alpha * pen.eigenvalues;
        B = 0.5 * (B + B.transpose()).eval();
        scale_ = B.diagonal();
        bool ok = (scale_.array() > 0.0).all();
        if (ok) {
            scale_ = scale_.cwiseSqrt().cwiseInverse();
            llt_.compute(scale_.asDiagonal() * B * scale_.asDiagonal());
            ok = llt_.info() == Eigen::Success && llt_.rcond() > 1e-13;
        }
        if (!ok) {
            throw SingularSystem("penalized system X^T X + alpha D is singular at alpha = " + std::to_string(alpha) +
                                 (alpha == 0.0 ? " (design matrix is column-rank deficient)"
                                               : " (ker X^T X and ker D intersect)"));
        }
    }

    template <typename Rhs>
    Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        const Matrix z = scale_.asDiagonal() * (U_->transpose() * rhs);
        return *U_ * (scale_.asDiagonal() * llt_.solve(z));
    }

    double log_det() const {
        const auto& L = llt_.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i)) - std::log(scale_[i]);
        return 2.0 * s;
    }

    Matrix inverse() const { return solve(Matrix::Identity(U_->rows(), U_->cols())); }
    double alpha() const { return alpha_; }

private:
    double alpha_;
    const Matrix* U_;
    Vector scale_;
    Eigen::LLT<Matrix> llt_;
};

/// Minimizer of ||y - X beta||^2 + alpha beta^T D beta.
inline Vector solve_penalized(const Matrix& X, const Matrix& D, const Vector& y, double alpha) {
    detail::require(X.rows() == y.size(), "solve_penalized: X rows and y length differ");
    const Penalty pen = make_penalty(D);
    const PenalizedSystem sys(X.transpose() * X, pen, alpha);
    return sys.solve(X.transpose() * y);
}

namespace detail {

struct PenalizedFitStats {
    Vector beta;
    double rss_pen = 0.0;
    double log_det_a = 0.0;
};

inline PenalizedFitStats penalized_stats(const SplineModel& model, const Vector& y, const Vector& Xty, double alpha) {
    const PenalizedSystem sys(model.XtX, model.penalty, alpha);
    PenalizedFitStats out;
    out.beta = sys.solve(Xty);
    const Vector resid = y - model.X * out.beta;
    out.rss_pen = resid.squaredNorm() + alpha * penalty_value(model.penalty, out.beta);
    out.log_det_a = sys.log_det();
    return out;
}

inline double reml_from_stats(const SplineModel& model, const PenalizedFitStats& s, double alpha) {
    const int m0 = model.penalty.null_dim;
    const double dof = model.n() - m0;
    const double rss = std::max(s.rss_pen, std::numeric_limits<double>::min());
    const double log_pdet_alpha_d = (model.p() - m0) * std::log(alpha) + model.penalty.log_pdet;
    return -0.5 * (dof * (1.0 + std::log(2.0 * std::numbers::pi * rss / dof)) + s.log_det_a - log_pdet_alpha_d);
}

}  // namespace detail

/// Restricted log-likelihood of the mixed-model representation with sigma^2
/// profiled out.  Terms that do not depend on alpha are dropped.
inline double reml_criterion(const SplineModel& model, const Vector& y, double alpha) {
    detail::require(alpha > 0.0 && std::isfinite(alpha), "reml_criterion: alpha must be > 0");
    detail::require(model.n() > model.penalty.null_dim, "reml_criterion: n must exceed dim ker D");
    const Vector Xty = model.X.transpose() * y;
    return detail::reml_from_stats(model, detail::penalized_stats(model, y, Xty, alpha), alpha);
}

struct SelectOptions {
    double log10_lo = -8.0;
    double log10_hi = 8.0;
    int grid_points = 41;
    double rel_tol = 1e-4;  ///< on log10(alpha)
};

struct AlphaSelection {
    double alpha = 0.0;
    double criterion = 0.0;
    bool at_boundary = false;  ///< maximum found at an end of the search grid
};

/// Maximize the REML criterion: log-spaced grid, then golden-section search
/// on log10(alpha) inside the bracket around the best grid point.
inline AlphaSelection select_alpha(const SplineModel& model, const Vector& y, const SelectOptions& opt = {}) {
    detail::require(model.n() > model.penalty.null_dim, "select_alpha: n must exceed dim ker D");
    detail::require(opt.grid_points >= 3 && opt.log10_lo < opt.log10_hi, "select_alpha: invalid search grid");
    const Vector Xty = model.X.transpose() * y;
    auto crit = [&](double log10_alpha) {
        const double alpha = std::pow(10.0, log10_alpha);
        try {
            return detail::reml_from_stats(model, detail::penalized_stats(model, y, Xty, alpha), alpha);
        } catch (const SingularSystem&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    const double lo = opt.log10_lo, hi = opt.log10_hi;
    // y already in the null space of the penalty (e.g. constant or exactly
    // linear data): every alpha interpolates and only roundoff would decide.
    if (const int m0 = model.penalty.null_dim; m0 > 0) {
        const Matrix Z0 = model.X * model.penalty.eigenvectors.leftCols(m0);
        const Vector r = y - Z0 * Z0.colPivHouseholderQr().solve(y);
        if (r.norm() <= 1e-10 * y.norm()) {
            const double a_hi = std::pow(10.0, hi);
            return {a_hi, detail::reml_from_stats(model, detail::penalized_stats(model, y, Xty, a_hi), a_hi), true};
        }
    }
    auto node = [&](int i) { return lo + (hi - lo) * i / (opt.grid_points - 1); };
    const int N = opt.grid_points;
    std::vector<double> v(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) v[static_cast<std::size_t>(i)] = crit(node(i));

    constexpr double kInvPhi = 0.6180339887498949;
    auto golden = [&](double a, double b) {
        double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
        double fc = crit(c), fd = crit(d);
        while (b - a > opt.rel_tol * std::max(1.0, std::fabs(0.5 * (a + b)))) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - kInvPhi * (b - a);
                fc = crit(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + kInvPhi * (b - a);
                fd = crit(d);
            }
        }
        return 0.5 * (a + b);
    };

    // The criterion can have several local maxima, some narrower than the
    // grid spacing, so every local grid maximum that stands out from its
    // neighbours by more than roundoff is refined and the best one kept.
    constexpr double kFlat = 1e-5;
    double best_x = v.front() >= v.back() ? lo : hi;
    double best_val = std::max(v.front(), v.back());
    for (int i = 1; i + 1 < N; ++i) {
        const double left = v[static_cast<std::size_t>(i - 1)], mid = v[static_cast<std::size_t>(i)],
                     right = v[static_cast<std::size_t>(i + 1)];
        if (!(mid >= left && mid >= right) || mid - std::min(left, right) <= kFlat) {
            if (mid > best_val) {
                best_val = mid;
                best_x = node(i);
            }
            continue;
        }
        double x = golden(node(i - 1), node(i + 1));
        double val = crit(x);
        if (mid > val) {
            x = node(i);
            val = mid;
        }
        if (val > best_val) {
            best_val = val;
            best_x = x;
        }
    }
    if (best_x == lo || best_x == hi) return {std::pow(10.0, best_x), best_val, true};
    // A maximum that beats an end of the grid by less than kFlat is the
    // criterion's asymptotic plateau (alpha -> 0 or infinity) plus roundoff.
    if (best_val - v.back() <= kFlat) return {std::pow(10.0, hi), v.back(), true};
    if (best_val - v.front() <= kFlat) return {std::pow(10.0, lo), v.front(), true};
    return {std::pow(10.0, best_x), best_val, false};
}

enum class Sigma2Divisor {
    NullSpace,      ///< n - dim ker D, paired with the penalized RSS
    EffectiveDf,    ///< n - tr(H_alpha), paired with the plain RSS
};

/// Noise variance estimate determined by a fixed alpha.
inline double estimate_sigma2(const SplineModel& model, const Vector& y, double alpha,
                              Sigma2Divisor divisor = Sigma2Divisor::NullSpace) {
    const PenalizedSystem sys(model.XtX, model.penalty, alpha);
    const Vector beta = sys.solve(model.X.transpose() * y);
    const double rss = (y - model.X * beta).squaredNorm();
    if (divisor == Sigma2Divisor::NullSpace) {
        const int m0 = model.penalty.null_dim;
        detail::require(model.n() > m0, "estimate_sigma2: n must exceed dim ker D");
        return (rss + alpha * penalty_value(model.penalty, beta)) / (model.n() - m0);
    }
    const double edf = sys.solve(model.XtX).trace();
    detail::require(model.n() - edf > 1e-8, "estimate_sigma2: n - edf is not positive (saturated model)");
    return rss / (model.n() - edf);
}

struct FixedAlpha {
    double alpha = 0.0;
};

struct RemlAlpha {
    SelectOptions options{};
};

using AlphaChoice = std::variant<FixedAlpha, RemlAlpha>;

struct FitOptions {
    AlphaChoice alpha = RemlAlpha{};
    Sigma2Divisor sigma2_divisor = Sigma2Divisor::NullSpace;
};

/// Result of one penalized spline fit.
struct FitResult {
    std::shared_ptr<const SplineModel> model;
    Vector y;
    double alpha = 0.0;
    Vector beta_hat;
    double sigma2_hat = 0.0;
    Matrix a_inv;     ///< (X^T X + alpha D)^{-1}
    Matrix a_inv_xt;  ///< (X^T X + alpha D)^{-1} X^T
    double edf = 0.0;
    bool reml_selected = false;
    bool alpha_at_boundary = false;
    bool saturated = false;  ///< no residual degrees of freedom; sigma2_hat is reported as 0
    double reml_value = std::numeric_limits<double>::quiet_NaN();

    /// Fitted curve beta_hat^T B(x).
    double operator()(double x) const { return eval_basis(model->knots, x).dot(beta_hat); }
};

/// Fit on a prebuilt model; the coverage harness reuses one model across replicates.
inline FitResult fit(std::shared_ptr<const SplineModel> model, Vector y, const FitOptions& opt = {}) {
    detail::require(y.size() == model->n(), "fit: response length differs from the design");
    FitResult out;
    const int m0 = model->penalty.null_dim;
    if (const auto* fixed = std::get_if<FixedAlpha>(&opt.alpha)) {
        out.alpha = fixed->alpha;
    } else if (model->n() <= m0) {
        // Every basis function is unpenalized and the data cannot identify alpha.
        out.alpha = 0.0;
        out.alpha_at_boundary = true;
    } else {
        const auto sel = select_alpha(*model, y, std::get<RemlAlpha>(opt.alpha).options);
        out.alpha = sel.alpha;
        out.reml_selected = true;
        out.alpha_at_boundary = sel.at_boundary;
        out.reml_value = sel.criterion;
    }
    const PenalizedSystem sys(model->XtX, model->penalty, out.alpha);
    out.a_inv = sys.inverse();
    out.a_inv_xt = sys.solve(model->X.transpose());
    out.beta_hat = out.a_inv_xt * y;
    out.edf = (out.a_inv * model->XtX).trace();
    const double rss = (y - model->X * out.beta_hat).squaredNorm();
    out.saturated = model->n() - out.edf < 1e-8;
    if (opt.sigma2_divisor == Sigma2Divisor::NullSpace && model->n() > m0) {
        out.sigma2_hat = (rss + out.alpha * penalty_value(model->penalty, out.beta_hat)) / (model->n() - m0);
    } else if (opt.sigma2_divisor == Sigma2Divisor::EffectiveDf && !out.saturated) {
        out.sigma2_hat = rss / (model->n() - out.edf);
    } else {
        out.saturated = true;
        out.sigma2_hat = 0.0;
    }
    out.model = std::move(model);
    out.y = std::move(y);
    return out;
}

inline FitResult fit(const Dataset& data, const KnotVector& knots, const FitOptions& opt = {}) {
    data.validate(knots.domain());
    auto model = std::make_shared<const SplineModel>(knots, data.xs);
    return fit(std::move(model), Eigen::Map<const Vector>(data.ys.data(), static_cast<Eigen::Index>(data.ys.size())),
               opt);
}

}  // namespace pspline
