#pragma once

// CSV and JSON serialization of datasets, fits, bands and coverage reports.
// Numbers are written in shortest round-trip form, so a loaded file
// re-serializes byte for byte.

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "coverage.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "intervals.hpp"

namespace pspline::io {

using nlohmann::json;

/// Header plus string cells; quoted fields ("a,b", "say ""hi""") are supported.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< 1-based file line of each row

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) return c;
        }
        throw ParseError("CSV: missing column '" + name + "'");
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    if (quoted) throw ParseError("CSV: unterminated quote on line " + std::to_string(line_no));
    cells.push_back(std::move(cell));
    return cells;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line, line_no);
        if (!have_header) {
            for (auto& c : cells) c = detail::trim(c);
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError("CSV: row on line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                             " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ParseError("CSV: empty input (no header row)");
    return table;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("CSV: cannot open '" + path + "'");
    return read_csv(in);
}

inline double parse_double(const std::string& text, const std::string& where) {
    const std::string t = detail::trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ParseError(where + ": non-numeric value '" + t + "'");
    }
    return v;
}

inline std::vector<double> numeric_column(const CsvTable& table, const std::string& name) {
    const std::size_t c = table.column(name);
    std::vector<double> out(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out[r] = parse_double(table.rows[r][c], "CSV line " + std::to_string(table.line_numbers[r]) + ", column '" +
                                                    name + "'");
    }
    return out;
}

inline Dataset read_dataset(const std::string& path, const std::string& x_column, const std::string& y_column) {
    const CsvTable table = read_csv_file(path);
    Dataset data{numeric_column(table, x_column), numeric_column(table, y_column)};
    return data;
}

// ---------------------------------------------------------------------------
// Bands

inline void write_band_csv(const ConfidenceBand& band, std::ostream& out) {
    out << "x,estimate,lower,upper\n";
    for (std::size_t j = 0; j < band.grid.size(); ++j) {
        out << format_number(band.grid[j]) << ',' << format_number(band.estimate[j]) << ','
            << format_number(band.lower[j]) << ',' << format_number(band.upper[j]) << '\n';
    }
}

/// Loads the four CSV columns; metadata lives in the JSON companion.
inline ConfidenceBand read_band_csv(std::istream& in) {
    const CsvTable table = read_csv(in);
    const std::vector<std::string> expected{"x", "estimate", "lower", "upper"};
    if (table.header != expected) throw ParseError("band CSV: header must be x,estimate,lower,upper");
    ConfidenceBand band;
    band.grid = numeric_column(table, "x");
    band.estimate = numeric_column(table, "estimate");
    band.lower = numeric_column(table, "lower");
    band.upper = numeric_column(table, "upper");
    return band;
}

inline json method_json(const IntervalMethod& m) {
    json j;
    j["tag"] = describe(m);
    if (const auto* t = std::get_if<ThetaReduced>(&m)) {
        j["kind"] = "theta_reduced";
        j["theta"] = t->theta;
    } else if (const auto* h = std::get_if<Hodges>(&m)) {
        j["kind"] = "hodges";
        j["original_variance"] = h->original_variance;
    } else {
        j["kind"] = "iterative_bc";
        j["n_bc"] = std::get<IterativeBC>(m).n_bc;
    }
    return j;
}

inline json band_json(const ConfidenceBand& band) {
    json j;
    j["method"] = method_json(band.method);
    j["level"] = band.level;
    j["alpha_star"] = band.alpha_star;
    j["critical_value"] = band.critical_value;
    j["aggregate_squared_half_width"] = band.aggregate_squared_half_width();
    j["x"] = band.grid;
    j["estimate"] = band.estimate;
    j["sd"] = band.sd;
    j["lower"] = band.lower;
    j["upper"] = band.upper;
    return j;
}

// ---------------------------------------------------------------------------
// Fits

/// Everything needed to rebuild a fit: knots, data and the chosen alpha.
inline json fit_json(const FitResult& fit, const std::string& x_column = "x", const std::string& y_column = "y") {
    const KnotVector& knots = fit.model->knots;
    json j;
    j["alpha"] = fit.alpha;
    if (fit.alpha > 0.0) j["log10_alpha"] = std::log10(fit.alpha);
    j["reml_selected"] = fit.reml_selected;
    j["alpha_at_boundary"] = fit.alpha_at_boundary;
    j["saturated"] = fit.saturated;
    j["sigma2_hat"] = fit.sigma2_hat;
    j["edf"] = fit.edf;
    j["n"] = fit.model->n();
    j["p"] = fit.model->p();
    j["coefficients"] = std::vector<double>(fit.beta_hat.data(), fit.beta_hat.data() + fit.beta_hat.size());
    j["knots"] = {{"domain", {knots.domain().lo, knots.domain().hi}},
                  {"interior", knots.interior()},
                  {"order", knots.order()}};
    j["data"] = {{"x_column", x_column}, {"y_column", y_column}, {"x", fit.model->xs}};
    j["data"]["y"] = std::vector<double>(fit.y.data(), fit.y.data() + fit.y.size());
    return j;
}

inline KnotVector knots_from_json(const json& j) {
    try {
        const auto& k = j.at("knots");
        const auto dom = k.at("domain").get<std::vector<double>>();
        if (dom.size() != 2) throw ParseError("fit JSON: knots.domain must have two entries");
        return KnotVector({dom[0], dom[1]}, k.at("interior").get<std::vector<double>>(), k.at("order").get<int>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("fit JSON: ") + e.what());
    }
}

/// Rebuilds a fit from fit_json() output at the recorded alpha.
inline FitResult fit_from_json(const json& j, Sigma2Divisor divisor = Sigma2Divisor::NullSpace) {
    const KnotVector knots = knots_from_json(j);
    Dataset data;
    double alpha = 0.0;
    try {
        data.xs = j.at("data").at("x").get<std::vector<double>>();
        data.ys = j.at("data").at("y").get<std::vector<double>>();
        alpha = j.at("alpha").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("fit JSON: ") + e.what());
    }
    FitOptions opt;
    opt.alpha = FixedAlpha{alpha};
    opt.sigma2_divisor = divisor;
    FitResult fit = pspline::fit(data, knots, opt);
    fit.reml_selected = j.value("reml_selected", false);
    fit.alpha_at_boundary = j.value("alpha_at_boundary", false);
    return fit;
}

// ---------------------------------------------------------------------------
// Coverage

inline void write_coverage_csv(const CoverageReport& report, const MethodCoverage& mc, std::ostream& out,
                               bool header = true) {
    if (header) out << "x,method,coverage,mc_se,mean_half_width\n";
    const std::string tag = describe(mc.method);
    for (std::size_t j = 0; j < report.grid.size(); ++j) {
        out << format_number(report.grid[j]) << ',' << tag << ',' << format_number(mc.coverage[j]) << ','
            << format_number(mc.mc_se[j]) << ',' << format_number(mc.mean_half_width[j]) << '\n';
    }
}

inline json coverage_json(const CoverageReport& report) {
    json j;
    j["replicates"] = report.replicates;
    j["level"] = report.level;
    j["master_seed"] = report.master_seed;
    j["boundary_count"] = report.boundary_count();
    j["boundary_replicates"] = report.boundary_replicates;
    j["alpha_star_log10"] = {{"mean", report.alpha.mean_log10},
                             {"min", report.alpha.min_log10},
                             {"median", report.alpha.median_log10},
                             {"max", report.alpha.max_log10}};
    j["grid"] = report.grid;
    j["truth"] = report.truth;
    j["methods"] = json::array();
    for (const auto& mc : report.methods) {
        const std::size_t at = mc.argmin();
        j["methods"].push_back({{"method", method_json(mc.method)},
                                {"min_coverage", mc.coverage[at]},
                                {"argmin_x", report.grid[at]},
                                {"coverage", mc.coverage},
                                {"mc_se", mc.mc_se},
                                {"mean_half_width", mc.mean_half_width},
                                {"singular_count", mc.singular_replicates.size()},
                                {"singular_replicates", mc.singular_replicates}});
    }
    return j;
}

inline json comparison_json(const MethodComparison& cmp) {
    return {{"first", cmp.first},
            {"second", cmp.second},
            {"max_abs_difference", cmp.max_abs_difference},
            {"argmax_x", cmp.grid.empty() ? 0.0 : cmp.grid[cmp.argmax]},
            {"x", cmp.grid},
            {"difference", cmp.difference},
            {"paired_se", cmp.paired_se}};
}

}  // namespace pspline::io
