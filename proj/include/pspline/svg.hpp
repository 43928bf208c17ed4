#pragma once

// Minimal SVG 1.1 plotting: axes with ticks, scatter points, shaded bands,
// polylines and dashed reference lines, arranged in a grid of panels.
// Output depends only on the inputs (fixed number formatting, no timestamps).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace pspline::svg {

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Tick label: up to 4 significant digits, trailing zeros removed.
inline std::string tick_label(double v) {
    if (std::fabs(v) < 1e-12) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// "Nice" tick positions covering [lo, hi] (1, 2, 5 x 10^k steps).
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    const double span = hi - lo;
    const double raw = span / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (raw <= step) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(t);
    return ticks;
}

}  // namespace detail

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    bool empty() const { return !(lo <= hi); }
};

struct Scatter {
    std::vector<double> x, y;
    std::string color = "#555555";
    double radius = 1.8;
};

struct Band {
    std::vector<double> x, lower, upper;
    std::string color = "#999999";
    double opacity = 0.45;
};

struct Line {
    std::vector<double> x, y;
    std::string color = "#000000";
    double width = 1.4;
    bool dashed = false;
    std::string label;  ///< shown in the legend when non-empty
};

struct HLine {
    double y = 0.0;
    std::string color = "#aa0000";
    bool dashed = true;
};

class Panel {
public:
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Scatter> scatters;
    std::vector<Band> bands;
    std::vector<Line> lines;
    std::vector<HLine> hlines;
    /// Fixed limits; data ranges are used where these are left empty.
    Range x_limits, y_limits;

    Range x_range() const {
        if (!x_limits.empty()) return x_limits;
        Range r;
        for (const auto& s : scatters) for (double v : s.x) r.include(v);
        for (const auto& b : bands) for (double v : b.x) r.include(v);
        for (const auto& l : lines) for (double v : l.x) r.include(v);
        return padded(r, 0.0);
    }

    Range y_range() const {
        if (!y_limits.empty()) return y_limits;
        Range r;
        for (const auto& s : scatters) for (double v : s.y) r.include(v);
        for (const auto& b : bands) {
            for (double v : b.lower) r.include(v);
            for (double v : b.upper) r.include(v);
        }
        for (const auto& l : lines) for (double v : l.y) r.include(v);
        for (const auto& h : hlines) r.include(h.y);
        return padded(r, 0.04);
    }

private:
    static Range padded(Range r, double frac) {
        if (r.empty()) return {0.0, 1.0};
        if (r.hi == r.lo) return {r.lo - 0.5, r.hi + 0.5};
        const double pad = frac * (r.hi - r.lo);
        return {r.lo - pad, r.hi + pad};
    }
};

/// Panels laid out row-major in a `columns`-wide grid.
class Figure {
public:
    explicit Figure(int columns = 1, double panel_width = 480, double panel_height = 340)
        : columns_(std::max(1, columns)), pw_(panel_width), ph_(panel_height) {}

    Panel& add_panel() {
        panels_.emplace_back();
        return panels_.back();
    }

    std::size_t size() const { return panels_.size(); }

    void write(std::ostream& out) const {
        pspline::detail::require(!panels_.empty(), "svg: figure has no panels");
        const int n = static_cast<int>(panels_.size());
        const int cols = std::min(columns_, n);
        const int rows = (n + columns_ - 1) / columns_;
        const double W = cols * pw_, H = rows * ph_;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << detail::num(W)
            << "\" height=\"" << detail::num(H) << "\" viewBox=\"0 0 " << detail::num(W) << ' ' << detail::num(H)
            << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\">\n"
            << "<rect x=\"0\" y=\"0\" width=\"" << detail::num(W) << "\" height=\"" << detail::num(H)
            << "\" fill=\"#ffffff\"/>\n";
        for (int i = 0; i < n; ++i) {
            write_panel(out, panels_[static_cast<std::size_t>(i)], (i % columns_) * pw_, (i / columns_) * ph_);
        }
        out << "</svg>\n";
    }

    std::string str() const {
        std::ostringstream ss;
        write(ss);
        return ss.str();
    }

private:
    void write_panel(std::ostream& out, const Panel& p, double ox, double oy) const {
        const double left = 58, right = 14, top = 28, bottom = 44;
        const double x0 = ox + left, x1 = ox + pw_ - right;
        const double y0 = oy + ph_ - bottom, y1 = oy + top;
        const Range xr = p.x_range(), yr = p.y_range();
        auto sx = [&](double x) { return x0 + (x - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
        auto sy = [&](double y) { return y0 - (y - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };

        out << "<g>\n";
        if (!p.title.empty()) {
            out << "<text x=\"" << detail::num(0.5 * (x0 + x1)) << "\" y=\"" << detail::num(oy + 18)
                << "\" text-anchor=\"middle\" font-size=\"13\">" << detail::escape(p.title) << "</text>\n";
        }
        for (const auto& b : p.bands) {
            out << "<polygon fill=\"" << b.color << "\" fill-opacity=\"" << detail::num(b.opacity)
                << "\" stroke=\"none\" points=\"";
            for (std::size_t j = 0; j < b.x.size(); ++j) out << detail::num(sx(b.x[j])) << ',' << detail::num(sy(b.upper[j])) << ' ';
            for (std::size_t j = b.x.size(); j-- > 0;) out << detail::num(sx(b.x[j])) << ',' << detail::num(sy(b.lower[j])) << ' ';
            out << "\"/>\n";
        }
        for (const auto& h : p.hlines) {
            if (h.y < yr.lo || h.y > yr.hi) continue;
            out << "<line x1=\"" << detail::num(x0) << "\" y1=\"" << detail::num(sy(h.y)) << "\" x2=\""
                << detail::num(x1) << "\" y2=\"" << detail::num(sy(h.y)) << "\" stroke=\"" << h.color << '"'
                << (h.dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>\n";
        }
        for (const auto& s : p.scatters) {
            for (std::size_t j = 0; j < s.x.size(); ++j) {
                out << "<circle cx=\"" << detail::num(sx(s.x[j])) << "\" cy=\"" << detail::num(sy(s.y[j]))
                    << "\" r=\"" << detail::num(s.radius) << "\" fill=\"" << s.color << "\"/>\n";
            }
        }
        for (const auto& l : p.lines) {
            out << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"" << detail::num(l.width)
                << '"' << (l.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
            for (std::size_t j = 0; j < l.x.size(); ++j) out << detail::num(sx(l.x[j])) << ',' << detail::num(sy(l.y[j])) << ' ';
            out << "\"/>\n";
        }

        // frame, ticks, labels
        out << "<rect x=\"" << detail::num(x0) << "\" y=\"" << detail::num(y1) << "\" width=\""
            << detail::num(x1 - x0) << "\" height=\"" << detail::num(y0 - y1)
            << "\" fill=\"none\" stroke=\"#000000\"/>\n";
        for (double t : detail::nice_ticks(xr.lo, xr.hi)) {
            const double px = sx(t);
            out << "<line x1=\"" << detail::num(px) << "\" y1=\"" << detail::num(y0) << "\" x2=\"" << detail::num(px)
                << "\" y2=\"" << detail::num(y0 + 4) << "\" stroke=\"#000000\"/>\n"
                << "<text x=\"" << detail::num(px) << "\" y=\"" << detail::num(y0 + 16)
                << "\" text-anchor=\"middle\">" << detail::tick_label(t) << "</text>\n";
        }
        for (double t : detail::nice_ticks(yr.lo, yr.hi)) {
            const double py = sy(t);
            out << "<line x1=\"" << detail::num(x0 - 4) << "\" y1=\"" << detail::num(py) << "\" x2=\""
                << detail::num(x0) << "\" y2=\"" << detail::num(py) << "\" stroke=\"#000000\"/>\n"
                << "<text x=\"" << detail::num(x0 - 6) << "\" y=\"" << detail::num(py + 4)
                << "\" text-anchor=\"end\">" << detail::tick_label(t) << "</text>\n";
        }
        if (!p.x_label.empty()) {
            out << "<text x=\"" << detail::num(0.5 * (x0 + x1)) << "\" y=\"" << detail::num(oy + ph_ - 8)
                << "\" text-anchor=\"middle\">" << detail::escape(p.x_label) << "</text>\n";
        }
        if (!p.y_label.empty()) {
            const double cx = ox + 14, cy = 0.5 * (y0 + y1);
            out << "<text x=\"" << detail::num(cx) << "\" y=\"" << detail::num(cy) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
                << detail::num(cx) << ' ' << detail::num(cy) << ")\">" << detail::escape(p.y_label) << "</text>\n";
        }

        double ly = y1 + 14;
        for (const auto& l : p.lines) {
            if (l.label.empty()) continue;
            out << "<line x1=\"" << detail::num(x1 - 120) << "\" y1=\"" << detail::num(ly - 4) << "\" x2=\""
                << detail::num(x1 - 100) << "\" y2=\"" << detail::num(ly - 4) << "\" stroke=\"" << l.color
                << "\" stroke-width=\"2\"" << (l.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n"
                << "<text x=\"" << detail::num(x1 - 95) << "\" y=\"" << detail::num(ly) << "\">"
                << detail::escape(l.label) << "</text>\n";
            ly += 14;
        }
        out << "</g>\n";
    }

    int columns_;
    double pw_, ph_;
    std::vector<Panel> panels_;
};

/// Distinct colors for overlaid series.
inline const std::string& palette(std::size_t i) {
    static const std::vector<std::string> colors{"#1b4f9c", "#c0392b", "#2e8b57", "#8e44ad",
                                                 "#d35400", "#16a085", "#7f8c8d", "#b7950b"};
    return colors[i % colors.size()];
}

}  // namespace pspline::svg
