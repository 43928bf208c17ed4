// pspline: penalized-spline fits, confidence bands and coverage experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "pspline/commands.hpp"

namespace {

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::vector<pspline::IntervalMethod> collect_methods(const std::vector<double>& thetas, const std::vector<int>& nbcs,
                                                     const std::vector<std::string>& tags) {
    std::vector<pspline::IntervalMethod> out;
    for (double t : thetas) {
        pspline::IntervalMethod m = pspline::ThetaReduced{t};
        pspline::validate(m);
        out.push_back(m);
    }
    for (int n : nbcs) {
        pspline::IntervalMethod m = pspline::IterativeBC{n};
        pspline::validate(m);
        out.push_back(m);
    }
    for (const auto& tag : tags) out.push_back(pspline::parse_method(tag));
    return out;
}

// Console summaries only; files keep full round-trip precision.
std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void print_band_summary(const std::vector<pspline::ConfidenceBand>& bands) {
    for (const auto& b : bands) {
        std::cout << "band " << pspline::describe(b.method)
                  << "  aggregate squared half-width = " << short_number(b.aggregate_squared_half_width())
                  << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized spline smoothing with bias-aware confidence bands"};
    app.set_version_flag("--version", std::string(PSPLINE_VERSION));
    app.require_subcommand(1);

    std::vector<double> thetas;
    std::vector<int> nbcs;
    std::vector<std::string> method_tags;
    double tau = 0.05;
    bool student_t = false;
    std::string grid = "design";
    std::string out_dir;

    auto add_band_flags = [&](CLI::App* sub) {
        sub->add_option("--theta", thetas, "theta-reduced band(s), theta in [0,1]; repeatable");
        sub->add_option("--nbc", nbcs, "iterative bias-corrected band(s) with N_BC iterations; repeatable");
        sub->add_option("--method", method_tags, "band by tag: theta=0.1, hodges, hodges-orig, iter:5; repeatable");
        sub->add_option("--tau", tau, "1 - nominal level")->capture_default_str();
        sub->add_flag("--student-t", student_t, "Student-t critical value with n - edf degrees of freedom");
        sub->add_option("--grid", grid, "evaluation grid: design, uniform (512 points) or a point count")
            ->capture_default_str();
        sub->add_option("--out", out_dir, "output directory (default $PSPLINE_OUT_DIR or pspline-out)");
    };

    pspline::cli::FitCommand fit_cmd;
    std::string divisor = "nullspace";
    double alpha = -1.0;
    auto* fit = app.add_subcommand("fit", "fit a penalized spline to two CSV columns");
    fit->add_option("--csv", fit_cmd.csv_path, "input CSV with a header row")->required();
    fit->add_option("--x", fit_cmd.x_column, "predictor column")->capture_default_str();
    fit->add_option("--y", fit_cmd.y_column, "response column")->capture_default_str();
    fit->add_option("--knots", fit_cmd.knots, "number of equally spaced interior knots")->capture_default_str();
    fit->add_option("--order", fit_cmd.order, "spline order (4 = cubic)")->capture_default_str();
    fit->add_flag("--knots-include-boundary", fit_cmd.count_includes_boundary,
                  "count --knots as all breakpoints including both ends");
    fit->add_option("--alpha", alpha, "fixed smoothing strength (default: REML)");
    fit->add_option("--sigma2-divisor", divisor, "nullspace or edf")->capture_default_str();
    add_band_flags(fit);

    pspline::cli::BandCommand band_cmd;
    auto* band = app.add_subcommand("band", "confidence bands from a saved fit");
    band->add_option("--fit", band_cmd.fit_path, "fit.json written by 'pspline fit'")->required();
    add_band_flags(band);

    pspline::cli::CoverageCommand cov_cmd;
    std::uint64_t seed = 0;
    int replicates = 0;
    std::string cov_grid;
    auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage experiment from a config file");
    cov->add_option("--config", cov_cmd.config_path, "experiment config file")->required();
    auto* seed_opt = cov->add_option("--seed", seed, "override run.seed");
    auto* rep_opt = cov->add_option("--replicates", replicates, "override run.replicates");
    auto* grid_opt = cov->add_option("--grid", cov_grid, "override run.grid: auto, design or uniform");
    cov->add_option("--workers", cov_cmd.workers, "worker threads (0 = all cores)")->capture_default_str();
    cov->add_option("--out", out_dir, "output directory (default $PSPLINE_OUT_DIR or pspline-out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "pspline: error: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        const pspline::cli::BandRequest req{collect_methods(thetas, nbcs, method_tags), tau,
                                       student_t ? pspline::CriticalValue::StudentT : pspline::CriticalValue::Normal,
                                       grid};
        if (fit->parsed()) {
            fit_cmd.bands = req;
            fit_cmd.out_dir = out_dir;
            fit_cmd.sigma2_divisor = pspline::cli::detail::parse_divisor(divisor);
            if (fit->count("--alpha")) fit_cmd.alpha = alpha;
            const auto outcome = pspline::cli::cmd_fit(fit_cmd);
            for (const auto& w : outcome.warnings) std::cerr << "pspline: warning: " << one_line(w) << "\n";
            const auto& f = outcome.fit;
            std::cout << "n = " << f.model->n() << ", p = " << f.model->p() << ", alpha = "
                      << short_number(f.alpha) << (f.reml_selected ? " (REML)" : fit_cmd.alpha ? " (fixed)" : " (default)")
                      << ", sigma2_hat = " << short_number(f.sigma2_hat)
                      << ", edf = " << short_number(f.edf) << "\n";
            print_band_summary(outcome.bands);
            std::cout << "wrote " << outcome.manifest.outputs.size() << " files\n";
        } else if (band->parsed()) {
            band_cmd.request = req;
            band_cmd.out_dir = out_dir;
            const auto manifest = pspline::cli::cmd_band(band_cmd);
            std::cout << "wrote " << manifest.outputs.size() << " files\n";
        } else {
            if (seed_opt->count()) cov_cmd.seed = seed;
            if (rep_opt->count()) cov_cmd.replicates = replicates;
            if (grid_opt->count()) cov_cmd.grid = cov_grid;
            cov_cmd.out_dir = out_dir;
            const auto outcome = pspline::cli::cmd_coverage(cov_cmd);
            const auto& r = outcome.report;
            std::cout << "R = " << r.replicates << ", seed = " << r.master_seed
                      << ", boundary alpha replicates = " << r.boundary_count() << "\n";
            for (const auto& mc : r.methods) {
                const std::size_t at = mc.argmin();
                std::cout << pspline::describe(mc.method) << ": min coverage "
                          << short_number(mc.coverage[at]) << " at x = "
                          << short_number(r.grid[at]) << "\n";
                if (!mc.singular_replicates.empty()) {
                    std::cerr << "pspline: warning: " << pspline::describe(mc.method) << " was undefined in "
                              << mc.singular_replicates.size()
                              << " replicates (rank-deficient design); counted as not covered\n";
                }
            }
            for (const auto& c : outcome.comparisons) {
                std::cout << c.first << " vs " << c.second << ": max |difference| "
                          << short_number(c.max_abs_difference) << " at x = "
                          << short_number(c.grid[c.argmax]) << "\n";
            }
            std::cout << "wrote " << outcome.manifest.outputs.size() << " files\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "pspline: error: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
