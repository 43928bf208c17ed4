#pragma once

// Synthetic data for coverage experiments: target curves, design samplers and
// noise models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "basis.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "rng.hpp"

namespace pspline {

/// Piecewise-linear "broken stick" whose corners are rounded by the unique
/// parabola tangent to both adjacent lines at corner -/+ half_width.
///
/// Segment s has slope slopes[s]; the stick starts at value `intercept` at
/// domain.lo and bends at each entry of `corners`.
struct BrokenStick {
    std::vector<double> corners{1.0, 3.0};
    std::vector<double> slopes{0.1, -0.1, 0.5};
    double intercept = 0.0;
    double half_width = 0.2;
    Interval domain{0.0, 5.0};

    void validate() const {
        detail::require(domain.lo < domain.hi, "broken stick: invalid domain");
        detail::require(slopes.size() == corners.size() + 1, "broken stick: need one more slope than corners");
        detail::require(half_width >= 0.0, "broken stick: blend half-width must be >= 0");
        for (std::size_t i = 0; i < corners.size(); ++i) {
            detail::require(corners[i] - half_width > domain.lo && corners[i] + half_width < domain.hi,
                            "broken stick: blend window leaves the domain");
            detail::require(i == 0 || corners[i - 1] + half_width < corners[i] - half_width,
                            "broken stick: blend windows overlap");
        }
    }

    /// Value of segment s's line at x.
    double line(std::size_t s, double x) const {
        double start = domain.lo, value = intercept;
        for (std::size_t i = 0; i < s; ++i) {
            value += slopes[i] * (corners[i] - start);
            start = corners[i];
        }
        return value + slopes[s] * (x - start);
    }

    /// The unsmoothed broken stick.
    double raw(double x) const {
        const auto s = static_cast<std::size_t>(std::upper_bound(corners.begin(), corners.end(), x) - corners.begin());
        return line(s, x);
    }

    double operator()(double x) const {
        detail::require(domain.contains(x), "broken stick: x = " + std::to_string(x) + " outside the domain");
        for (std::size_t i = 0; i < corners.size(); ++i) {
            const double left = corners[i] - half_width;
            if (half_width > 0.0 && x >= left && x <= corners[i] + half_width) {
                const double u = x - left;
                return line(i, left) + slopes[i] * u + (slopes[i + 1] - slopes[i]) / (4.0 * half_width) * u * u;
            }
        }
        return raw(x);
    }

    double derivative(double x) const {
        for (std::size_t i = 0; i < corners.size(); ++i) {
            const double left = corners[i] - half_width;
            if (half_width > 0.0 && x >= left && x <= corners[i] + half_width) {
                return slopes[i] + (slopes[i + 1] - slopes[i]) / (2.0 * half_width) * (x - left);
            }
        }
        return slopes[static_cast<std::size_t>(std::upper_bound(corners.begin(), corners.end(), x) - corners.begin())];
    }
};

/// Arbitrary callable target; not serializable.
struct CustomTarget {
    std::string name;
    std::function<double(double)> f;
    Interval domain{0.0, 5.0};
};

using TargetFunction = std::variant<BrokenStick, CustomTarget>;

inline double evaluate(const TargetFunction& target, double x) {
    if (const auto* b = std::get_if<BrokenStick>(&target)) return (*b)(x);
    return std::get<CustomTarget>(target).f(x);
}

inline Interval target_domain(const TargetFunction& target) {
    return std::visit([](const auto& t) { return t.domain; }, target);
}

inline double smoothed_broken_stick(double x) { return BrokenStick{}(x); }

struct EquallySpaced {
    int n = 101;
    Interval domain{0.0, 5.0};
};

/// n sorted draws of scale * Beta(shape1, shape2).
struct ScaledBeta {
    int n = 101;
    double shape1 = 1.0;
    double shape2 = 1.0;
    double scale = 5.0;
};

using DesignSampler = std::variant<EquallySpaced, ScaledBeta>;

inline int design_size(const DesignSampler& s) {
    return std::visit([](const auto& v) { return v.n; }, s);
}

inline bool design_is_fixed(const DesignSampler& s) { return std::holds_alternative<EquallySpaced>(s); }

inline std::vector<double> sample_design(const DesignSampler& sampler, RandomStream& rng) {
    if (const auto* eq = std::get_if<EquallySpaced>(&sampler)) {
        detail::require(eq->n >= 2, "sample_design: need at least two equally spaced points");
        std::vector<double> xs(static_cast<std::size_t>(eq->n));
        for (int i = 0; i < eq->n; ++i) {
            xs[static_cast<std::size_t>(i)] = eq->domain.lo + eq->domain.width() * i / (eq->n - 1);
        }
        xs.back() = eq->domain.hi;
        return xs;
    }
    const auto& b = std::get<ScaledBeta>(sampler);
    detail::require(b.n >= 1 && b.shape1 > 0.0 && b.shape2 > 0.0 && b.scale > 0.0, "sample_design: invalid Beta sampler");
    std::vector<double> xs(static_cast<std::size_t>(b.n));
    for (auto& x : xs) x = b.scale * rng.beta(b.shape1, b.shape2);
    std::sort(xs.begin(), xs.end());
    return xs;
}

inline std::vector<double> sample_design(const DesignSampler& sampler, std::uint64_t seed, std::uint64_t stream = 0) {
    RandomStream rng(seed, stream);
    return sample_design(sampler, rng);
}

/// Raises when the design cannot support an unpenalized fit with p coefficients.
inline void check_design_size(const DesignSampler& sampler, int p) {
    if (design_size(sampler) < p) {
        throw InvalidArgument("design has n = " + std::to_string(design_size(sampler)) + " < p = " + std::to_string(p) +
                              " points; the unpenalized fit would be singular");
    }
}

struct ConstantNoise {
    double sigma = 0.1;
};

/// sigma(x) = slope * x + intercept.
struct LinearNoise {
    double slope = 0.0;
    double intercept = 0.1;
};

using NoiseModel = std::variant<ConstantNoise, LinearNoise>;

inline double noise_sd(const NoiseModel& noise, double x) {
    if (const auto* c = std::get_if<ConstantNoise>(&noise)) return c->sigma;
    const auto& l = std::get<LinearNoise>(noise);
    return l.slope * x + l.intercept;
}

inline void validate_noise(const NoiseModel& noise, const Interval& domain) {
    if (const auto* c = std::get_if<ConstantNoise>(&noise)) {
        detail::require(c->sigma >= 0.0, "noise: sigma must be >= 0");
    } else {
        detail::require(noise_sd(noise, domain.lo) > 0.0 && noise_sd(noise, domain.hi) > 0.0,
                        "noise: sigma(x) must be positive over the domain");
    }
}

/// y_i = f(x_i) + eps_i with eps_i ~ N(0, sigma(x_i)^2), drawn from stream
/// (seed, stream).  Design draws come first, then one normal per point.
inline Dataset generate_dataset(const TargetFunction& target, const DesignSampler& sampler, const NoiseModel& noise,
                                std::uint64_t seed, std::uint64_t stream = 0) {
    if (const auto* b = std::get_if<BrokenStick>(&target)) b->validate();
    validate_noise(noise, target_domain(target));
    RandomStream rng(seed, stream);
    Dataset data;
    data.xs = sample_design(sampler, rng);
    data.ys.resize(data.xs.size());
    for (std::size_t i = 0; i < data.xs.size(); ++i) {
        data.ys[i] = evaluate(target, data.xs[i]) + noise_sd(noise, data.xs[i]) * rng.normal();
    }
    return data;
}

}  // namespace pspline
