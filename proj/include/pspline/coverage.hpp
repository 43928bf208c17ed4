#pragma once

// Monte Carlo coverage experiments: repeated generate -> fit -> band -> check
// cycles with per-x empirical coverage and Monte Carlo standard errors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "basis.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "intervals.hpp"
#include "simgen.hpp"

namespace pspline {

struct KnotSpec {
    int n_interior = 24;
    int order = 4;
    /// Count the knots as all breakpoints including both ends instead of interior only.
    bool count_includes_boundary = false;

    KnotVector make(const Interval& domain) const {
        return count_includes_boundary ? make_knots_total(domain, n_interior, order)
                                       : make_knots(domain, n_interior, order);
    }
};

enum class GridKind {
    Auto,     ///< design points for fixed designs, uniform otherwise
    Design,
    Uniform,
};

struct ExperimentConfig {
    TargetFunction target = BrokenStick{};
    DesignSampler sampler = EquallySpaced{};
    NoiseModel noise = ConstantNoise{0.1};
    KnotSpec knots{};
    double level = 0.95;
    std::vector<IntervalMethod> methods{ThetaReduced{1.0}};
    int replicates = 1000;
    std::uint64_t master_seed = 0;
    GridKind grid = GridKind::Auto;
    int uniform_grid_points = 101;
    SelectOptions select{};
    Sigma2Divisor sigma2_divisor = Sigma2Divisor::NullSpace;

    void validate() const {
        detail::require(replicates >= 1, "experiment: replicates must be >= 1");
        detail::require(level > 0.0 && level < 1.0, "experiment: level must lie in (0, 1)");
        detail::require(!methods.empty(), "experiment: at least one interval method is required");
        for (const auto& m : methods) pspline::validate(m);
        if (const auto* b = std::get_if<BrokenStick>(&target)) b->validate();
        validate_noise(noise, target_domain(target));
        if (grid == GridKind::Design) {
            detail::require(design_is_fixed(sampler), "experiment: design grid requires a fixed (equally spaced) design");
        }
    }
};

/// Coverage of one interval method across the grid.
struct MethodCoverage {
    IntervalMethod method;
    std::vector<double> coverage;
    std::vector<double> mc_se;
    std::vector<double> mean_half_width;
    /// Replicate-major indicator table, indicators[r * grid + j].
    std::vector<std::uint8_t> indicators;
    /// Replicates where the band was undefined (rank-deficient X at theta = 0).
    /// They count as not covered; mean_half_width averages over the others.
    std::vector<int> singular_replicates;

    std::size_t argmin() const {
        return static_cast<std::size_t>(std::min_element(coverage.begin(), coverage.end()) - coverage.begin());
    }
    double min_coverage() const { return coverage[argmin()]; }
};

struct AlphaSummary {
    double mean_log10 = 0.0;
    double min_log10 = 0.0;
    double median_log10 = 0.0;
    double max_log10 = 0.0;
};

struct CoverageReport {
    std::vector<double> grid;
    std::vector<double> truth;
    int replicates = 0;
    double level = 0.95;
    std::uint64_t master_seed = 0;
    std::vector<MethodCoverage> methods;
    AlphaSummary alpha;
    std::vector<double> alpha_star;       ///< per replicate
    std::vector<int> boundary_replicates; ///< REML maximum on the search boundary

    int boundary_count() const { return static_cast<int>(boundary_replicates.size()); }

    const MethodCoverage& find(const IntervalMethod& m) const {
        const std::string tag = describe(m);
        for (const auto& mc : methods) {
            if (describe(mc.method) == tag) return mc;
        }
        throw InvalidArgument("coverage report has no method '" + tag + "'");
    }
};

namespace detail {

struct ReplicateOutcome {
    double alpha = 0.0;
    bool boundary = false;
    std::vector<std::uint8_t> covered;  // method-major, size methods * grid
    std::vector<double> half_width;
    std::vector<std::uint8_t> singular;  // per method
};

inline unsigned resolve_workers(int workers) {
    if (workers > 0) return static_cast<unsigned>(workers);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

}  // namespace detail

/// Runs the experiment.  Replicate r draws from stream (master_seed, r) and
/// results are reduced in replicate order, so the report is identical for
/// any worker count.
inline CoverageReport run_experiment(const ExperimentConfig& config, int workers = 0) {
    config.validate();
    const Interval domain = target_domain(config.target);
    const KnotVector knots = config.knots.make(domain);
    check_design_size(config.sampler, knots.num_basis());

    const bool fixed_design = design_is_fixed(config.sampler);
    const bool design_grid =
        config.grid == GridKind::Design || (config.grid == GridKind::Auto && fixed_design);

    std::shared_ptr<const SplineModel> shared_model;
    std::vector<double> grid_points;
    if (fixed_design) {
        const auto xs = sample_design(config.sampler, config.master_seed, 0);
        shared_model = std::make_shared<const SplineModel>(knots, xs);
        if (design_grid) grid_points = xs;
    }
    if (!design_grid) grid_points = uniform_points(domain, config.uniform_grid_points);
    const EvalGrid grid(knots, grid_points);
    std::vector<double> truth(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) truth[j] = evaluate(config.target, grid.xs[j]);

    FitOptions fit_opt;
    fit_opt.alpha = RemlAlpha{config.select};
    fit_opt.sigma2_divisor = config.sigma2_divisor;
    BandOptions band_opt;
    band_opt.tau = 1.0 - config.level;

    const std::size_t R = static_cast<std::size_t>(config.replicates);
    const std::size_t nm = config.methods.size();
    const std::size_t m = grid.size();
    std::vector<detail::ReplicateOutcome> outcomes(R);

    auto run_one = [&](std::size_t r) {
        const Dataset data = generate_dataset(config.target, config.sampler, config.noise, config.master_seed, r);
        auto model = shared_model ? shared_model : std::make_shared<const SplineModel>(knots, data.xs);
        const FitResult fr =
            fit(model, Eigen::Map<const Vector>(data.ys.data(), static_cast<Eigen::Index>(data.ys.size())), fit_opt);
        detail::ReplicateOutcome out;
        out.alpha = fr.alpha;
        out.boundary = fr.alpha_at_boundary;
        out.covered.resize(nm * m);
        out.half_width.resize(nm * m);
        out.singular.assign(nm, 0);
        for (std::size_t k = 0; k < nm; ++k) {
            ConfidenceBand band;
            try {
                band = make_band(fr, config.methods[k], grid, band_opt);
            } catch (const SingularSystem&) {
                out.singular[k] = 1;
                continue;
            }
            const auto ind = band_coverage_indicator(band, truth);
            for (std::size_t j = 0; j < m; ++j) {
                out.covered[k * m + j] = ind[j];
                out.half_width[k * m + j] = band.half_width(j);
            }
        }
        outcomes[r] = std::move(out);
    };

    const unsigned nworkers = std::min<unsigned>(detail::resolve_workers(workers), static_cast<unsigned>(R));
    if (nworkers <= 1) {
        for (std::size_t r = 0; r < R; ++r) run_one(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(nworkers);
        for (unsigned w = 0; w < nworkers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < R; r = next++) {
                    try {
                        run_one(r);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = R;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    CoverageReport report;
    report.grid = grid.xs;
    report.truth = truth;
    report.replicates = config.replicates;
    report.level = config.level;
    report.master_seed = config.master_seed;
    report.alpha_star.resize(R);
    for (std::size_t k = 0; k < nm; ++k) {
        MethodCoverage mc;
        mc.method = config.methods[k];
        mc.coverage.assign(m, 0.0);
        mc.mc_se.assign(m, 0.0);
        mc.mean_half_width.assign(m, 0.0);
        mc.indicators.resize(R * m);
        std::vector<int> hits(m, 0);
        for (std::size_t r = 0; r < R; ++r) {
            if (outcomes[r].singular[k]) mc.singular_replicates.push_back(static_cast<int>(r));
            for (std::size_t j = 0; j < m; ++j) {
                const std::uint8_t c = outcomes[r].covered[k * m + j];
                mc.indicators[r * m + j] = c;
                hits[j] += c;
                mc.mean_half_width[j] += outcomes[r].half_width[k * m + j];
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double cov = static_cast<double>(hits[j]) / static_cast<double>(R);
            mc.coverage[j] = cov;
            mc.mc_se[j] = std::sqrt(cov * (1.0 - cov) / static_cast<double>(R));
            const std::size_t defined = R - mc.singular_replicates.size();
            mc.mean_half_width[j] = defined ? mc.mean_half_width[j] / static_cast<double>(defined)
                                            : std::numeric_limits<double>::quiet_NaN();
        }
        report.methods.push_back(std::move(mc));
    }
    std::vector<double> logs(R);
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        report.alpha_star[r] = outcomes[r].alpha;
        logs[r] = std::log10(outcomes[r].alpha);
        sum += logs[r];
        if (outcomes[r].boundary) report.boundary_replicates.push_back(static_cast<int>(r));
    }
    std::sort(logs.begin(), logs.end());
    report.alpha.mean_log10 = sum / static_cast<double>(R);
    report.alpha.min_log10 = logs.front();
    report.alpha.max_log10 = logs.back();
    report.alpha.median_log10 = R % 2 ? logs[R / 2] : 0.5 * (logs[R / 2 - 1] + logs[R / 2]);
    return report;
}

struct ThetaAxis {
    std::vector<double> thetas;
};

struct NbcAxis {
    std::vector<int> n_bc;
};

using SweepAxis = std::variant<ThetaAxis, NbcAxis>;

/// One single-method report per axis value.  All values are evaluated inside
/// the same replicates, so comparisons across the sweep are paired.
inline std::vector<CoverageReport> sweep(const ExperimentConfig& config, const SweepAxis& axis, int workers = 0) {
    ExperimentConfig cfg = config;
    cfg.methods.clear();
    if (const auto* t = std::get_if<ThetaAxis>(&axis)) {
        for (double theta : t->thetas) cfg.methods.push_back(ThetaReduced{theta});
    } else {
        for (int n : std::get<NbcAxis>(axis).n_bc) cfg.methods.push_back(IterativeBC{n});
    }
    detail::require(!cfg.methods.empty(), "sweep: empty axis");
    CoverageReport all = run_experiment(cfg, workers);
    std::vector<CoverageReport> out;
    out.reserve(all.methods.size());
    for (auto& mc : all.methods) {
        CoverageReport one = all;
        one.methods = {mc};
        out.push_back(std::move(one));
    }
    return out;
}

struct MethodComparison {
    std::string first;
    std::string second;
    std::vector<double> grid;
    std::vector<double> difference;  ///< coverage(first) - coverage(second)
    std::vector<double> paired_se;
    double max_abs_difference = 0.0;
    std::size_t argmax = 0;
};

/// Per-x coverage difference with the standard error of the paired
/// difference of indicators.  Both reports must come from the same replicates.
inline MethodComparison compare_methods(const CoverageReport& ra, const IntervalMethod& a, const CoverageReport& rb,
                                        const IntervalMethod& b) {
    detail::require(ra.grid == rb.grid, "compare_methods: reports use different grids");
    detail::require(ra.replicates == rb.replicates && ra.master_seed == rb.master_seed,
                    "compare_methods: reports do not share replicate streams");
    const MethodCoverage& ma = ra.find(a);
    const MethodCoverage& mb = rb.find(b);
    const std::size_t m = ra.grid.size();
    const std::size_t R = static_cast<std::size_t>(ra.replicates);
    MethodComparison out;
    out.first = describe(a);
    out.second = describe(b);
    out.grid = ra.grid;
    out.difference.resize(m);
    out.paired_se.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        long sum = 0, sum_sq = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const int d = int(ma.indicators[r * m + j]) - int(mb.indicators[r * m + j]);
            sum += d;
            sum_sq += d * d;
        }
        const double mean = static_cast<double>(sum) / static_cast<double>(R);
        const double var = static_cast<double>(sum_sq) / static_cast<double>(R) - mean * mean;
        out.difference[j] = ma.coverage[j] - mb.coverage[j];
        out.paired_se[j] = std::sqrt(std::max(0.0, var) / static_cast<double>(R));
        if (std::fabs(out.difference[j]) > out.max_abs_difference) {
            out.max_abs_difference = std::fabs(out.difference[j]);
            out.argmax = j;
        }
    }
    return out;
}

inline MethodComparison compare_methods(const CoverageReport& report, const IntervalMethod& a, const IntervalMethod& b) {
    return compare_methods(report, a, report, b);
}

}  // namespace pspline
