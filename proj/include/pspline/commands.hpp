#pragma once

// Implementation of the pspline command-line subcommands.  Each command
// writes its files under an output directory and returns the manifest it
// wrote; failures throw pspline::Error.  Needs OpenSSL (libcrypto) for the
// manifest's SHA-256.

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "coverage.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "intervals.hpp"
#include "io.hpp"
#include "svg.hpp"

#ifndef PSPLINE_VERSION
#define PSPLINE_VERSION "0.1.0"
#endif

namespace pspline::cli {

namespace fs = std::filesystem;
using io::json;

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

inline std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Filesystem-safe form of a method tag: "theta=0.1" -> "theta-0.1".
inline std::string file_tag(const IntervalMethod& m) {
    std::string s = describe(m);
    for (char& c : s) {
        if (c == '=' || c == ':') c = '-';
    }
    return s;
}

/// Default output directory: $PSPLINE_OUT_DIR, else "pspline-out".
inline std::string default_out_dir() {
    const char* env = std::getenv("PSPLINE_OUT_DIR");
    return (env && *env) ? env : "pspline-out";
}

struct RunManifest {
    std::string command;
    std::string input_path;
    std::string config_sha256;
    std::optional<std::uint64_t> seed;
    std::string version = PSPLINE_VERSION;
    double duration_seconds = 0.0;
    std::vector<std::string> outputs;

    json to_json() const {
        json j;
        j["command"] = command;
        j["input"] = input_path;
        j["config_sha256"] = config_sha256;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["version"] = version;
        j["duration_seconds"] = duration_seconds;
        j["outputs"] = outputs;
        return j;
    }
};

namespace detail {

class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : dir_(dir.empty() ? default_out_dir() : dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    /// Writes text to dir/name and records it.
    void write(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error("cannot write '" + p.string() + "'");
        out << text;
        out.close();
        if (!out) throw Error("write failed for '" + p.string() + "'");
        written_.push_back(p.string());
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& written() const { return written_; }
    fs::path path(const std::string& name) const { return dir_ / name; }

private:
    fs::path dir_;
    std::vector<std::string> written_;
};

inline void finish(RunManifest& manifest, OutputDir& out, std::chrono::steady_clock::time_point start) {
    manifest.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.outputs = out.written();
    manifest.outputs.push_back(out.path("manifest.json").string());
    out.write_json("manifest.json", manifest.to_json());
}

inline Sigma2Divisor parse_divisor(const std::string& s) {
    if (s == "nullspace") return Sigma2Divisor::NullSpace;
    if (s == "edf") return Sigma2Divisor::EffectiveDf;
    throw InvalidArgument("unknown sigma2 divisor '" + s + "' (expected nullspace or edf)");
}

inline std::string divisor_name(Sigma2Divisor d) { return d == Sigma2Divisor::NullSpace ? "nullspace" : "edf"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// band

struct BandRequest {
    std::vector<IntervalMethod> methods;
    double tau = 0.05;
    CriticalValue critical = CriticalValue::Normal;
    /// "design", "uniform" (512 points) or a point count for a uniform grid.
    std::string grid = "design";
    std::string x_label = "x";
    std::string y_label = "y";
};

inline std::vector<double> resolve_grid(const FitResult& fit, const std::string& spec) {
    const Interval dom = fit.model->knots.domain();
    if (spec == "design") {
        std::vector<double> xs = fit.model->xs;
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        return xs;
    }
    if (spec == "uniform") return uniform_points(dom, 512);
    int m = 0;
    const auto res = std::from_chars(spec.data(), spec.data() + spec.size(), m);
    if (res.ec != std::errc() || res.ptr != spec.data() + spec.size() || m < 2) {
        throw InvalidArgument("unknown grid '" + spec + "' (expected design, uniform or a point count >= 2)");
    }
    return uniform_points(dom, m);
}

/// Emits band_<tag>.csv/.json/.svg per method plus bands_panel.svg.
inline std::vector<ConfidenceBand> write_bands(const FitResult& fit, const BandRequest& req, detail::OutputDir& out) {
    if (req.methods.empty()) throw InvalidArgument("band: no methods requested");
    const BandOptions opt{req.tau, req.critical};
    const EvalGrid grid(fit.model->knots, resolve_grid(fit, req.grid));
    const EvalGrid plot_grid(fit.model->knots, uniform_points(fit.model->knots.domain(), 512));
    for (const auto& m : req.methods) {
        if (const auto* t = std::get_if<ThetaReduced>(&m); t && t->theta == 0.0 && fit.model->n() < fit.model->p()) {
            throw InvalidArgument("band theta=0 needs n >= p, have n = " + std::to_string(fit.model->n()) +
                                  ", p = " + std::to_string(fit.model->p()));
        }
    }

    std::vector<ConfidenceBand> bands;
    svg::Figure panel(2, 420, 300);
    for (const auto& m : req.methods) {
        ConfidenceBand band = make_band(fit, m, grid, opt);
        const ConfidenceBand smooth = make_band(fit, m, plot_grid, opt);
        const std::string tag = file_tag(m);

        std::ostringstream csv;
        io::write_band_csv(band, csv);
        out.write("band_" + tag + ".csv", csv.str());
        json j = io::band_json(band);
        j["tau"] = req.tau;
        j["critical"] = req.critical == CriticalValue::Normal ? "normal" : "student_t";
        out.write_json("band_" + tag + ".json", j);

        auto fill = [&](svg::Panel& p) {
            p.title = describe(m);
            p.x_label = req.x_label;
            p.y_label = req.y_label;
            p.bands.push_back({smooth.grid, smooth.lower, smooth.upper});
            p.scatters.push_back({fit.model->xs, {fit.y.data(), fit.y.data() + fit.y.size()}});
            p.lines.push_back({smooth.grid, smooth.estimate});
        };
        svg::Figure single;
        fill(single.add_panel());
        out.write("band_" + tag + ".svg", single.str());
        fill(panel.add_panel());
        bands.push_back(std::move(band));
    }
    out.write("bands_panel.svg", panel.str());
    return bands;
}

struct BandCommand {
    std::string fit_path;
    BandRequest request;
    std::string out_dir;
};

inline RunManifest cmd_band(const BandCommand& cmd) {
    const auto start = std::chrono::steady_clock::now();
    const std::string text = read_bytes(cmd.fit_path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError("fit JSON '" + cmd.fit_path + "': " + e.what());
    }
    const FitResult fit = io::fit_from_json(j, detail::parse_divisor(j.value("sigma2_divisor", "nullspace")));
    BandRequest req = cmd.request;
    if (j.contains("data")) {
        req.x_label = j["data"].value("x_column", req.x_label);
        req.y_label = j["data"].value("y_column", req.y_label);
    }
    detail::OutputDir out(cmd.out_dir);
    write_bands(fit, req, out);
    RunManifest manifest{"band", cmd.fit_path, sha256_hex(text), std::nullopt};
    detail::finish(manifest, out, start);
    return manifest;
}

// ---------------------------------------------------------------------------
// fit

struct FitCommand {
    std::string csv_path;
    std::string x_column = "x";
    std::string y_column = "y";
    int knots = 24;
    int order = 4;
    bool count_includes_boundary = false;
    std::optional<double> alpha;  ///< fixed alpha; REML when empty
    Sigma2Divisor sigma2_divisor = Sigma2Divisor::NullSpace;
    BandRequest bands;  ///< written when methods are requested
    std::string out_dir;
};

struct FitOutcome {
    FitResult fit;
    std::vector<ConfidenceBand> bands;
    RunManifest manifest;
    std::vector<std::string> warnings;
};

inline FitOutcome cmd_fit(const FitCommand& cmd) {
    const auto start = std::chrono::steady_clock::now();
    const std::string text = read_bytes(cmd.csv_path);
    std::istringstream in(text);
    const io::CsvTable table = io::read_csv(in);
    Dataset data{io::numeric_column(table, cmd.x_column), io::numeric_column(table, cmd.y_column)};
    if (data.size() < 3) throw InvalidArgument("fit needs at least 3 rows, have " + std::to_string(data.size()));

    const auto [lo, hi] = std::minmax_element(data.xs.begin(), data.xs.end());
    if (!(*lo < *hi)) throw InvalidArgument("fit: x column '" + cmd.x_column + "' is constant");
    const KnotSpec spec{cmd.knots, cmd.order, cmd.count_includes_boundary};
    const KnotVector knots = spec.make({*lo, *hi});

    FitOptions opt;
    if (cmd.alpha) {
        opt.alpha = FixedAlpha{*cmd.alpha};
    }
    opt.sigma2_divisor = cmd.sigma2_divisor;
    FitOutcome outcome{pspline::fit(data, knots, opt), {}, {}, {}};
    const FitResult& fit = outcome.fit;

    if (fit.saturated) {
        outcome.warnings.push_back("saturated fit interpolates the data (edf = n = " + std::to_string(fit.model->n()) +
                                   "); sigma2_hat set to 0");
    }
    if (!cmd.alpha && !fit.reml_selected) {
        outcome.warnings.push_back("alpha is not identifiable (n <= dimension of the penalty null space); using alpha = 0");
    } else if (fit.alpha_at_boundary) {
        outcome.warnings.push_back("REML maximum lies on the alpha search boundary (alpha = " +
                                   format_number(fit.alpha) + ")");
    }

    detail::OutputDir out(cmd.out_dir);
    json j = io::fit_json(fit, cmd.x_column, cmd.y_column);
    j["sigma2_divisor"] = detail::divisor_name(cmd.sigma2_divisor);
    j["warnings"] = outcome.warnings;
    out.write_json("fit.json", j);

    std::ostringstream fitted;
    fitted << cmd.x_column << ",fitted\n";
    for (double x : resolve_grid(fit, "design")) fitted << format_number(x) << ',' << format_number(fit(x)) << '\n';
    out.write("fitted.csv", fitted.str());

    if (!cmd.bands.methods.empty()) {
        BandRequest req = cmd.bands;
        req.x_label = cmd.x_column;
        req.y_label = cmd.y_column;
        outcome.bands = write_bands(fit, req, out);
    }
    outcome.manifest = {"fit", cmd.csv_path, sha256_hex(text), std::nullopt};
    detail::finish(outcome.manifest, out, start);
    return outcome;
}

// ---------------------------------------------------------------------------
// coverage

struct CoverageCommand {
    std::string config_path;
    std::optional<std::uint64_t> seed;  ///< overrides run.seed
    std::optional<int> replicates;      ///< overrides run.replicates
    std::optional<std::string> grid;    ///< overrides run.grid
    int workers = 0;                    ///< 0 = all cores
    std::string out_dir;
};

struct CoverageOutcome {
    CoverageReport report;
    std::vector<MethodComparison> comparisons;
    RunManifest manifest;
};

inline CoverageOutcome cmd_coverage(const CoverageCommand& cmd) {
    const auto start = std::chrono::steady_clock::now();
    const std::string text = read_bytes(cmd.config_path);
    config::KeyValues kv = config::parse_key_values(text);
    if (cmd.seed) {
        kv.values["run.seed"] = std::to_string(*cmd.seed);
        kv.lines.try_emplace("run.seed", 0);
    }
    config::RunSpec spec = config::to_run_spec(kv);
    ExperimentConfig& cfg = spec.experiment;
    if (cmd.replicates) cfg.replicates = *cmd.replicates;
    if (cmd.grid) {
        if (*cmd.grid == "design") {
            cfg.grid = GridKind::Design;
        } else if (*cmd.grid == "uniform") {
            cfg.grid = GridKind::Uniform;
        } else if (*cmd.grid == "auto") {
            cfg.grid = GridKind::Auto;
        } else {
            throw InvalidArgument("unknown grid '" + *cmd.grid + "' (expected auto, design or uniform)");
        }
    }
    cfg.validate();

    CoverageOutcome outcome;
    outcome.report = run_experiment(cfg, cmd.workers);
    const CoverageReport& report = outcome.report;
    for (const auto& c : spec.comparisons) outcome.comparisons.push_back(compare_methods(report, c.first, c.second));

    detail::OutputDir out(cmd.out_dir);
    std::ostringstream all;
    bool header = true;
    for (const auto& mc : report.methods) {
        std::ostringstream one;
        io::write_coverage_csv(report, mc, one);
        out.write("coverage_" + file_tag(mc.method) + ".csv", one.str());
        io::write_coverage_csv(report, mc, all, header);
        header = false;
    }
    out.write("coverage.csv", all.str());
    json j = io::coverage_json(report);
    j["comparisons"] = json::array();
    for (const auto& c : outcome.comparisons) j["comparisons"].push_back(io::comparison_json(c));
    out.write_json("coverage.json", j);

    svg::Figure fig(1, 640, 400);
    svg::Panel& p = fig.add_panel();
    p.title = "Empirical pointwise coverage, R = " + std::to_string(report.replicates);
    p.x_label = "x";
    p.y_label = "coverage";
    double ymin = report.level;
    for (const auto& mc : report.methods) ymin = std::min(ymin, mc.min_coverage());
    p.y_limits = {std::max(0.0, std::floor((ymin - 0.02) * 20.0) / 20.0), 1.0};
    p.hlines.push_back({report.level});
    for (std::size_t k = 0; k < report.methods.size(); ++k) {
        const auto& mc = report.methods[k];
        p.lines.push_back({report.grid, mc.coverage, svg::palette(k), 1.4, false, describe(mc.method)});
    }
    out.write("coverage.svg", fig.str());

    outcome.manifest = {"coverage", cmd.config_path, sha256_hex(text), cfg.master_seed};
    detail::finish(outcome.manifest, out, start);
    return outcome;
}

}  // namespace pspline::cli
