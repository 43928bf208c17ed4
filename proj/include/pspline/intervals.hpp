#pragma once

// Pointwise confidence bands for penalized spline fits: reduced smoothing
// (theta), unpenalized, simple-shift bias correction and iterated bias
// correction.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "basis.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "rng.hpp"

namespace pspline {

/// Band from a refit at smoothing strength theta * alpha*.  theta = 1 is the
/// fully penalized band, theta = 0 the unpenalized one.
struct ThetaReduced {
    double theta = 1.0;
};

/// One plug-in bias correction.  original_variance keeps the uncorrected fit's
/// variance instead of the corrected one.
struct Hodges {
    bool original_variance = false;
};

/// n_bc rounds of plug-in bias correction.
struct IterativeBC {
    int n_bc = 1;
};

using IntervalMethod = std::variant<ThetaReduced, Hodges, IterativeBC>;

inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Short stable tag, e.g. "theta=0.1", "hodges", "iter:5".
inline std::string describe(const IntervalMethod& m) {
    struct Visitor {
        std::string operator()(const ThetaReduced& t) const { return "theta=" + format_number(t.theta); }
        std::string operator()(const Hodges& h) const { return h.original_variance ? "hodges-orig" : "hodges"; }
        std::string operator()(const IterativeBC& b) const { return "iter:" + std::to_string(b.n_bc); }
    };
    return std::visit(Visitor{}, m);
}

inline void validate(const IntervalMethod& m) {
    if (const auto* t = std::get_if<ThetaReduced>(&m)) {
        detail::require(t->theta >= 0.0 && t->theta <= 1.0, "interval method: theta must lie in [0, 1]");
    } else if (const auto* b = std::get_if<IterativeBC>(&m)) {
        detail::require(b->n_bc >= 1, "interval method: N_BC must be >= 1");
    }
}

/// Parses the tags produced by describe(); also accepts "theta:x", "nbc=n",
/// "iter=n", "unpenalized" and "penalized".
inline IntervalMethod parse_method(const std::string& text) {
    auto number_after = [&](std::size_t pos) {
        const std::string rest = text.substr(pos);
        double v = 0.0;
        const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), v);
        if (res.ec != std::errc() || res.ptr != rest.data() + rest.size()) {
            throw InvalidArgument("unknown interval method '" + text + "'");
        }
        return v;
    };
    IntervalMethod out;
    if (text == "hodges") {
        out = Hodges{};
    } else if (text == "hodges-orig") {
        out = Hodges{true};
    } else if (text == "unpenalized") {
        out = ThetaReduced{0.0};
    } else if (text == "penalized") {
        out = ThetaReduced{1.0};
    } else if (text.rfind("theta", 0) == 0 && text.size() > 6 && (text[5] == '=' || text[5] == ':')) {
        out = ThetaReduced{number_after(6)};
    } else if ((text.rfind("iter", 0) == 0 && text.size() > 5 && (text[4] == '=' || text[4] == ':')) ||
               (text.rfind("nbc", 0) == 0 && text.size() > 4 && (text[3] == '=' || text[3] == ':'))) {
        const double v = number_after(text[0] == 'i' ? 5 : 4);
        if (v != std::floor(v)) throw InvalidArgument("unknown interval method '" + text + "'");
        out = IterativeBC{static_cast<int>(v)};
    } else {
        throw InvalidArgument("unknown interval method '" + text + "'");
    }
    validate(out);
    return out;
}

/// Evaluation abscissae with their basis rows cached.
struct EvalGrid {
    std::vector<double> xs;
    Matrix basis;  ///< row j = B(xs[j])^T

    EvalGrid(const KnotVector& knots, std::vector<double> points) : xs(std::move(points)), basis(build_design(knots, xs)) {}
    std::size_t size() const { return xs.size(); }
};

/// m equally spaced points covering [lo, hi] inclusive.
inline std::vector<double> uniform_points(const Interval& domain, int m) {
    detail::require(m >= 2, "uniform_points: need at least two points");
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = domain.lo + domain.width() * j / (m - 1);
    out.back() = domain.hi;
    return out;
}

enum class CriticalValue { Normal, StudentT };

struct BandOptions {
    double tau = 0.05;  ///< 1 - nominal level
    CriticalValue critical = CriticalValue::Normal;
};

struct ConfidenceBand {
    std::vector<double> grid;
    std::vector<double> estimate;
    std::vector<double> sd;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
    double critical_value = 0.0;
    IntervalMethod method = ThetaReduced{1.0};
    double alpha_star = 0.0;

    double half_width(std::size_t j) const { return upper[j] - estimate[j]; }

    /// Sum of squared half-widths over the grid.
    double aggregate_squared_half_width() const {
        double s = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) s += half_width(j) * half_width(j);
        return s;
    }
};

/// z_{tau/2}, or the Student-t quantile with n - edf degrees of freedom.
inline double critical_value(const FitResult& fit, const BandOptions& opt) {
    detail::require(opt.tau > 0.0 && opt.tau < 1.0, "band: tau must lie in (0, 1)");
    if (opt.critical == CriticalValue::Normal) return normal_quantile(1.0 - 0.5 * opt.tau);
    const double df = fit.model->n() - fit.edf;
    detail::require(df > 0.0, "band: Student-t critical value needs n > edf");
    return boost::math::quantile(boost::math::students_t(df), 1.0 - 0.5 * opt.tau);
}

namespace detail {

// est = G beta, var = diag(G C G^T) with C = sigma2 * S S^T for the linear
// map beta = S y, supplied as S directly.
inline ConfidenceBand assemble_band(const FitResult& fit, const EvalGrid& grid, const Vector& beta, const Matrix& coef_map,
                                    const IntervalMethod& method, const BandOptions& opt) {
    const double z = critical_value(fit, opt);
    const Vector est = grid.basis * beta;
    const Matrix GS = grid.basis * coef_map;
    ConfidenceBand band;
    band.grid = grid.xs;
    band.level = 1.0 - opt.tau;
    band.critical_value = z;
    band.method = method;
    band.alpha_star = fit.alpha;
    const std::size_t m = grid.size();
    band.estimate.resize(m);
    band.sd.resize(m);
    band.lower.resize(m);
    band.upper.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double sd = std::sqrt(fit.sigma2_hat * GS.row(jj).squaredNorm());
        band.estimate[j] = est[jj];
        band.sd[j] = sd;
        band.lower[j] = est[jj] - z * sd;
        band.upper[j] = est[jj] + z * sd;
    }
    return band;
}

}  // namespace detail

/// sigma2 * B(x)^T A^{-1} X^T X A^{-1} B(x) at every grid point, A = X^T X + alpha D.
inline std::vector<double> variance_of_fit(const SplineModel& model, double alpha, double sigma2, const EvalGrid& grid) {
    const PenalizedSystem sys(model.XtX, model.penalty, alpha);
    const Matrix G = sys.solve(grid.basis.transpose());  // p x m
    const Matrix XG = model.X * G;                       // n x m
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = sigma2 * XG.col(static_cast<Eigen::Index>(j)).squaredNorm();
    return out;
}

/// Fully penalized band at the fit's own alpha.
inline ConfidenceBand penalized_band(const FitResult& fit, const EvalGrid& grid, const BandOptions& opt = {}) {
    return detail::assemble_band(fit, grid, fit.beta_hat, fit.a_inv_xt, ThetaReduced{1.0}, opt);
}

/// Unpenalized band from ordinary least squares, solved by column-pivoted QR of X.
inline ConfidenceBand unpenalized_band(const FitResult& fit, const EvalGrid& grid, const BandOptions& opt = {}) {
    const Matrix& X = fit.model->X;
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < X.cols()) {
        throw SingularSystem("unpenalized fit: design matrix has rank " + std::to_string(qr.rank()) + " < p = " +
                             std::to_string(X.cols()));
    }
    const Vector beta0 = qr.solve(fit.y);
    // (X^T X)^{-1} X^T = pseudo-inverse of a full-column-rank X.
    const Matrix pinv = qr.solve(Matrix::Identity(X.rows(), X.rows()));
    return detail::assemble_band(fit, grid, beta0, pinv, ThetaReduced{0.0}, opt);
}

/// Band from the refit with smoothing strength theta * alpha*, sigma^2 held at
/// the alpha* estimate.
inline ConfidenceBand theta_band(const FitResult& fit, double theta, const EvalGrid& grid, const BandOptions& opt = {}) {
    detail::require(theta >= 0.0 && theta <= 1.0, "theta_band: theta must lie in [0, 1]");
    const PenalizedSystem sys(fit.model->XtX, fit.model->penalty, theta * fit.alpha);
    const Matrix coef_map = sys.solve(fit.model->X.transpose());
    const Vector beta = coef_map * fit.y;
    return detail::assemble_band(fit, grid, beta, coef_map, ThetaReduced{theta}, opt);
}

/// M = alpha* A^{-1} D, the bias-correction operator.
inline Matrix bias_operator(const FitResult& fit) { return fit.alpha * fit.a_inv * fit.model->D(); }

/// Simple-shift correction: beta_H = beta_1 - bias_hat(beta_1) = (I + M) beta_1.
inline ConfidenceBand hodges_band(const FitResult& fit, const EvalGrid& grid, const BandOptions& opt = {},
                                  bool original_variance = false) {
    const Matrix M = bias_operator(fit);
    const Vector bias_hat = -(M * fit.beta_hat);
    const Vector beta = fit.beta_hat - bias_hat;
    const Matrix L = Matrix::Identity(M.rows(), M.cols()) + M;
    const Matrix coef_map = original_variance ? fit.a_inv_xt : Matrix(L * fit.a_inv_xt);
    return detail::assemble_band(fit, grid, beta, coef_map, Hodges{original_variance}, opt);
}

/// Coefficients and linear operator after n_bc correction rounds, run as the
/// literal loop beta^(i+1) = beta_1 - bias_hat(beta^(i)).  Returns L with
/// beta_BC = L beta_1.
struct BiasCorrected {
    Vector beta;
    Matrix L;
};

inline BiasCorrected iterate_bias_correction(const FitResult& fit, int n_bc) {
    detail::require(n_bc >= 1, "iterative bias correction: N_BC must be >= 1");
    const Matrix M = bias_operator(fit);
    const Matrix I = Matrix::Identity(M.rows(), M.cols());
    BiasCorrected out{fit.beta_hat, I};
    for (int i = 0; i < n_bc; ++i) {
        const Vector bias_hat = -(M * out.beta);
        out.beta = fit.beta_hat - bias_hat;
        out.L = I + M * out.L;
    }
    return out;
}

inline ConfidenceBand iterative_band(const FitResult& fit, int n_bc, const EvalGrid& grid, const BandOptions& opt = {}) {
    const BiasCorrected bc = iterate_bias_correction(fit, n_bc);
    return detail::assemble_band(fit, grid, bc.beta, bc.L * fit.a_inv_xt, IterativeBC{n_bc}, opt);
}

/// Dispatch on the method descriptor.
inline ConfidenceBand make_band(const FitResult& fit, const IntervalMethod& method, const EvalGrid& grid,
                                const BandOptions& opt = {}) {
    validate(method);
    if (const auto* t = std::get_if<ThetaReduced>(&method)) return theta_band(fit, t->theta, grid, opt);
    if (const auto* h = std::get_if<Hodges>(&method)) return hodges_band(fit, grid, opt, h->original_variance);
    return iterative_band(fit, std::get<IterativeBC>(method).n_bc, grid, opt);
}

/// 1 where lower <= truth <= upper.
inline std::vector<std::uint8_t> band_coverage_indicator(const ConfidenceBand& band, std::span<const double> truth) {
    detail::require(truth.size() == band.grid.size(), "coverage indicator: truth and band grid differ in length");
    std::vector<std::uint8_t> out(truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j) out[j] = band.lower[j] <= truth[j] && truth[j] <= band.upper[j];
    return out;
}

}  // namespace pspline
