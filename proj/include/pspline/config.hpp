#pragma once

// Flat key = value experiment files with dotted sections.  See
// configs/README.md for the schema.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coverage.hpp"
#include "error.hpp"
#include "intervals.hpp"
#include "simgen.hpp"

namespace pspline::config {

/// A config file: ordered key/value pairs plus the raw bytes they came from.
struct KeyValues {
    std::map<std::string, std::string> values;
    std::map<std::string, std::size_t> lines;
};

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "target.kind",     "target.corners",  "target.slopes",     "target.intercept", "target.blend_half_width",
        "target.domain",   "sampler.kind",    "sampler.n",         "sampler.shape1",   "sampler.shape2",
        "sampler.scale",   "noise.kind",      "noise.sigma",       "noise.slope",      "noise.intercept",
        "knots.count",     "knots.order",     "knots.count_includes_boundary",
        "run.level",       "run.replicates",  "run.seed",          "run.methods",      "run.grid",
        "run.grid_points", "run.sigma2_divisor", "run.compare",    "run.alpha_log10_range", "run.alpha_grid_points",
    };
    return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace detail

inline KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (!known_keys().contains(key)) {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (kv.values.contains(key)) {
            throw ParseError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        kv.values[key] = value;
        kv.lines[key] = line_no;
    }
    return kv;
}

namespace detail {

class Reader {
public:
    explicit Reader(const KeyValues& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.values.contains(key); }

    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? kv_.values.at(key) : fallback;
    }

    double number(const std::string& key, double fallback) const {
        return has(key) ? to_double(key, kv_.values.at(key)) : fallback;
    }

    long long integer(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        const double v = number(key, 0.0);
        if (v != static_cast<double>(static_cast<long long>(v))) fail(key, "expected an integer");
        return static_cast<long long>(v);
    }

    std::uint64_t unsigned64(const std::string& key) const {
        const std::string& s = kv_.values.at(key);
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(key, "expected a non-negative integer");
        return v;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = kv_.values.at(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        fail(key, "expected true or false");
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& part : split(kv_.values.at(key), ',')) out.push_back(to_double(key, part));
        return out;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ParseError("config line " + std::to_string(kv_.lines.at(key)) + ": key '" + key + "': " + what);
    }

private:
    double to_double(const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            fail(key, "non-numeric value '" + s + "'");
        }
        return v;
    }

    const KeyValues& kv_;
};

}  // namespace detail

/// Paired methods to compare after a run, e.g. "theta=0.05 vs iter:5".
struct Comparison {
    IntervalMethod first;
    IntervalMethod second;
};

struct RunSpec {
    ExperimentConfig experiment;
    std::vector<Comparison> comparisons;
};

/// Builds an experiment from a parsed file; run.seed is mandatory.
inline RunSpec to_run_spec(const KeyValues& kv) {
    const detail::Reader r(kv);
    RunSpec spec;
    ExperimentConfig& cfg = spec.experiment;

    const std::string target_kind = r.text("target.kind", "broken_stick");
    if (target_kind != "broken_stick") r.fail("target.kind", "unsupported target '" + target_kind + "'");
    BrokenStick stick;
    stick.corners = r.numbers("target.corners", stick.corners);
    stick.slopes = r.numbers("target.slopes", stick.slopes);
    stick.intercept = r.number("target.intercept", stick.intercept);
    stick.half_width = r.number("target.blend_half_width", stick.half_width);
    const auto dom = r.numbers("target.domain", {stick.domain.lo, stick.domain.hi});
    if (dom.size() != 2) r.fail("target.domain", "expected 'lo, hi'");
    stick.domain = {dom[0], dom[1]};
    cfg.target = stick;

    const std::string sampler_kind = r.text("sampler.kind", "equally_spaced");
    const int n = static_cast<int>(r.integer("sampler.n", 101));
    if (sampler_kind == "equally_spaced") {
        cfg.sampler = EquallySpaced{n, stick.domain};
    } else if (sampler_kind == "scaled_beta") {
        cfg.sampler = ScaledBeta{n, r.number("sampler.shape1", 1.0), r.number("sampler.shape2", 1.0),
                                 r.number("sampler.scale", stick.domain.hi)};
    } else {
        r.fail("sampler.kind", "unsupported sampler '" + sampler_kind + "'");
    }

    const std::string noise_kind = r.text("noise.kind", "constant");
    if (noise_kind == "constant") {
        cfg.noise = ConstantNoise{r.number("noise.sigma", 0.1)};
    } else if (noise_kind == "linear") {
        cfg.noise = LinearNoise{r.number("noise.slope", 0.0), r.number("noise.intercept", 0.1)};
    } else {
        r.fail("noise.kind", "unsupported noise model '" + noise_kind + "'");
    }

    cfg.knots.n_interior = static_cast<int>(r.integer("knots.count", 24));
    cfg.knots.order = static_cast<int>(r.integer("knots.order", 4));
    cfg.knots.count_includes_boundary = r.boolean("knots.count_includes_boundary", false);

    cfg.level = r.number("run.level", 0.95);
    cfg.replicates = static_cast<int>(r.integer("run.replicates", 1000));
    if (!r.has("run.seed")) throw ParseError("config: run.seed is required (runs must be reproducible)");
    cfg.master_seed = r.unsigned64("run.seed");

    if (r.has("run.methods")) {
        cfg.methods.clear();
        for (const auto& tag : detail::split(r.text("run.methods", ""), ',')) {
            try {
                cfg.methods.push_back(parse_method(tag));
            } catch (const InvalidArgument& e) {
                r.fail("run.methods", e.what());
            }
        }
    }

    const std::string grid = r.text("run.grid", "auto");
    if (grid == "auto") {
        cfg.grid = GridKind::Auto;
    } else if (grid == "design") {
        cfg.grid = GridKind::Design;
    } else if (grid == "uniform") {
        cfg.grid = GridKind::Uniform;
    } else {
        r.fail("run.grid", "expected auto, design or uniform");
    }
    cfg.uniform_grid_points = static_cast<int>(r.integer("run.grid_points", 101));

    const std::string divisor = r.text("run.sigma2_divisor", "nullspace");
    if (divisor == "nullspace") {
        cfg.sigma2_divisor = Sigma2Divisor::NullSpace;
    } else if (divisor == "edf") {
        cfg.sigma2_divisor = Sigma2Divisor::EffectiveDf;
    } else {
        r.fail("run.sigma2_divisor", "expected nullspace or edf");
    }

    const auto range = r.numbers("run.alpha_log10_range", {cfg.select.log10_lo, cfg.select.log10_hi});
    if (range.size() != 2 || !(range[0] < range[1])) r.fail("run.alpha_log10_range", "expected 'lo, hi' with lo < hi");
    cfg.select.log10_lo = range[0];
    cfg.select.log10_hi = range[1];
    cfg.select.grid_points = static_cast<int>(r.integer("run.alpha_grid_points", cfg.select.grid_points));

    if (r.has("run.compare")) {
        for (const auto& pair : detail::split(r.text("run.compare", ""), ';')) {
            const auto vs = pair.find(" vs ");
            if (vs == std::string::npos) r.fail("run.compare", "expected 'method vs method'");
            try {
                spec.comparisons.push_back(
                    {parse_method(detail::trim(pair.substr(0, vs))), parse_method(detail::trim(pair.substr(vs + 4)))});
            } catch (const InvalidArgument& e) {
                r.fail("run.compare", e.what());
            }
        }
    }

    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return spec;
}

inline RunSpec parse(const std::string& text) { return to_run_spec(parse_key_values(text)); }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes a spec back in the file format; parse(serialize(s)) reproduces s.
inline std::string serialize(const RunSpec& spec) {
    const ExperimentConfig& cfg = spec.experiment;
    std::ostringstream out;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
        return s;
    };
    const auto* stick = std::get_if<BrokenStick>(&cfg.target);
    if (!stick) throw InvalidArgument("config: custom targets cannot be serialized");
    out << "target.kind = broken_stick\n"
        << "target.corners = " << list(stick->corners) << "\n"
        << "target.slopes = " << list(stick->slopes) << "\n"
        << "target.intercept = " << format_number(stick->intercept) << "\n"
        << "target.blend_half_width = " << format_number(stick->half_width) << "\n"
        << "target.domain = " << list({stick->domain.lo, stick->domain.hi}) << "\n";
    if (const auto* eq = std::get_if<EquallySpaced>(&cfg.sampler)) {
        out << "sampler.kind = equally_spaced\nsampler.n = " << eq->n << "\n";
    } else {
        const auto& b = std::get<ScaledBeta>(cfg.sampler);
        out << "sampler.kind = scaled_beta\nsampler.n = " << b.n << "\nsampler.shape1 = " << format_number(b.shape1)
            << "\nsampler.shape2 = " << format_number(b.shape2) << "\nsampler.scale = " << format_number(b.scale)
            << "\n";
    }
    if (const auto* c = std::get_if<ConstantNoise>(&cfg.noise)) {
        out << "noise.kind = constant\nnoise.sigma = " << format_number(c->sigma) << "\n";
    } else {
        const auto& l = std::get<LinearNoise>(cfg.noise);
        out << "noise.kind = linear\nnoise.slope = " << format_number(l.slope)
            << "\nnoise.intercept = " << format_number(l.intercept) << "\n";
    }
    out << "knots.count = " << cfg.knots.n_interior << "\nknots.order = " << cfg.knots.order
        << "\nknots.count_includes_boundary = " << (cfg.knots.count_includes_boundary ? "true" : "false") << "\n";
    out << "run.level = " << format_number(cfg.level) << "\nrun.replicates = " << cfg.replicates
        << "\nrun.seed = " << cfg.master_seed << "\nrun.methods = ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) out << (i ? ", " : "") << describe(cfg.methods[i]);
    out << "\nrun.grid = "
        << (cfg.grid == GridKind::Auto ? "auto" : cfg.grid == GridKind::Design ? "design" : "uniform")
        << "\nrun.grid_points = " << cfg.uniform_grid_points << "\nrun.sigma2_divisor = "
        << (cfg.sigma2_divisor == Sigma2Divisor::NullSpace ? "nullspace" : "edf")
        << "\nrun.alpha_log10_range = " << list({cfg.select.log10_lo, cfg.select.log10_hi})
        << "\nrun.alpha_grid_points = " << cfg.select.grid_points << "\n";
    if (!spec.comparisons.empty()) {
        out << "run.compare = ";
        for (std::size_t i = 0; i < spec.comparisons.size(); ++i) {
            out << (i ? "; " : "") << describe(spec.comparisons[i].first) << " vs "
                << describe(spec.comparisons[i].second);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace pspline::config
