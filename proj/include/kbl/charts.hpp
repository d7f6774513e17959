#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/trainer.hpp"

namespace kbl {

namespace chart_detail {

inline std::string fmt6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

/// Fixed series palette (cycled when there are more series than entries).
inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

inline std::string xml_escape(const std::string& s) {
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

struct Frame {
    // Pixel geometry (fixed so output bytes are stable).
    static constexpr double width = 640, height = 420;
    static constexpr double left = 64, right = 480, top = 48, bottom = 372;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

    double px(double x) const {
        return left + (x - x_min) / (x_max - x_min) * (right - left);
    }
    double py(double y) const {
        return bottom - (y - y_min) / (y_max - y_min) * (bottom - top);
    }
};

inline void pad_degenerate(double* lo, double* hi) {
    if (*lo == *hi) {
        double pad = *lo == 0.0 ? 0.5 : std::abs(*lo) * 0.1;
        *lo -= pad;
        *hi += pad;
    }
}

inline void open_svg(std::string& out, const std::string& title) {
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\" font-family=\"monospace\" font-size=\"12\">\n";
    out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    out += "<text x=\"272\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
           xml_escape(title) + "</text>\n";
}

inline void draw_axes(std::string& out, const Frame& f, const std::string& x_label,
                      const std::string& y_label, bool log_y) {
    out += "<line x1=\"" + fmt6(f.left) + "\" y1=\"" + fmt6(f.bottom) + "\" x2=\"" +
           fmt6(f.right) + "\" y2=\"" + fmt6(f.bottom) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + fmt6(f.left) + "\" y1=\"" + fmt6(f.top) + "\" x2=\"" +
           fmt6(f.left) + "\" y2=\"" + fmt6(f.bottom) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double tx = f.x_min + (f.x_max - f.x_min) * i / 4.0;
        double ty = f.y_min + (f.y_max - f.y_min) * i / 4.0;
        out += "<line x1=\"" + fmt6(f.px(tx)) + "\" y1=\"" + fmt6(f.bottom) + "\" x2=\"" +
               fmt6(f.px(tx)) + "\" y2=\"" + fmt6(f.bottom + 4) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + fmt6(f.px(tx)) + "\" y=\"" + fmt6(f.bottom + 18) +
               "\" text-anchor=\"middle\">" + fmt6(tx) + "</text>\n";
        out += "<line x1=\"" + fmt6(f.left - 4) + "\" y1=\"" + fmt6(f.py(ty)) + "\" x2=\"" +
               fmt6(f.left) + "\" y2=\"" + fmt6(f.py(ty)) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + fmt6(f.left - 8) + "\" y=\"" + fmt6(f.py(ty) + 4) +
               "\" text-anchor=\"end\">" + fmt6(log_y ? std::pow(10.0, ty) : ty) +
               "</text>\n";
    }
    out += "<text x=\"272\" y=\"404\" text-anchor=\"middle\">" + xml_escape(x_label) +
           "</text>\n";
    out += "<text x=\"16\" y=\"210\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
           "210)\">" +
           xml_escape(y_label) + (log_y ? " (log scale)" : "") + "</text>\n";
}

}  // namespace chart_detail

/// Pearson correlation over pairs where both entries are finite; NaN
/// when fewer than two usable pairs or either side is constant.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("pearson: length mismatch");
    double sx = 0, sy = 0;
    long n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
            sx += xs[i];
            sy += ys[i];
            n += 1;
        }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = sx / double(n), my = sy / double(n);
    double cxy = 0, cxx = 0, cyy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
            cxy += (xs[i] - mx) * (ys[i] - my);
            cxx += (xs[i] - mx) * (xs[i] - mx);
            cyy += (ys[i] - my) * (ys[i] - my);
        }
    if (cxx == 0.0 || cyy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return cxy / std::sqrt(cxx * cyy);
}

struct ChartSeries {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct LineChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
    bool log_y = false;  // plot log10(y); nonpositive/nonfinite points are skipped
};

/**
 * Multi-series line chart as a standalone SVG string. Everything is
 * derived from the inputs with fixed geometry, fonts, and %.6g number
 * formatting, so identical inputs give identical bytes. Non-finite
 * points (and nonpositive ones under log_y) are dropped per point, so a
 * diverged trace simply stops.
 */
inline std::string render_line_chart(const LineChartSpec& spec) {
    using namespace chart_detail;
    if (spec.series.empty())
        throw std::invalid_argument("render_line_chart: no series");

    std::vector<std::vector<std::pair<double, double>>> pts(spec.series.size());
    Frame f;
    f.x_min = f.y_min = std::numeric_limits<double>::infinity();
    f.x_max = f.y_max = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const ChartSeries& sr = spec.series[s];
        if (sr.xs.size() != sr.ys.size())
            throw std::invalid_argument("render_line_chart: series '" + sr.label +
                                        "' length mismatch");
        for (std::size_t i = 0; i < sr.xs.size(); ++i) {
            double x = sr.xs[i], y = sr.ys[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.log_y) {
                if (y <= 0.0) continue;
                y = std::log10(y);
            }
            pts[s].push_back({x, y});
            f.x_min = std::min(f.x_min, x);
            f.x_max = std::max(f.x_max, x);
            f.y_min = std::min(f.y_min, y);
            f.y_max = std::max(f.y_max, y);
        }
    }
    bool any = false;
    for (const auto& p : pts) any = any || !p.empty();
    if (!any) {
        f.x_min = 0;
        f.x_max = 1;
        f.y_min = 0;
        f.y_max = 1;
    }
    pad_degenerate(&f.x_min, &f.x_max);
    pad_degenerate(&f.y_min, &f.y_max);

    std::string out;
    open_svg(out, spec.title);
    draw_axes(out, f, spec.x_label, spec.y_label, spec.log_y);
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        if (pts[s].size() >= 2) {
            out += "<polyline fill=\"none\" stroke=\"";
            out += palette(s);
            out += "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [x, y] : pts[s])
                out += fmt6(f.px(x)) + "," + fmt6(f.py(y)) + " ";
            out += "\"/>\n";
        } else if (pts[s].size() == 1) {
            out += "<circle cx=\"" + fmt6(f.px(pts[s][0].first)) + "\" cy=\"" +
                   fmt6(f.py(pts[s][0].second)) + "\" r=\"3\" fill=\"" +
                   std::string(palette(s)) + "\"/>\n";
        }
        double ly = 48 + 18 * double(s);
        out += "<line x1=\"496\" y1=\"" + fmt6(ly - 4) + "\" x2=\"520\" y2=\"" +
               fmt6(ly - 4) + "\" stroke=\"" + std::string(palette(s)) +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"526\" y=\"" + fmt6(ly) + "\">" + xml_escape(spec.series[s].label) +
               "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

struct ScatterChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> xs;
    std::vector<double> ys;
    bool log_x = false;
    bool log_y = false;
};

/// Scatter plot with the Pearson correlation of the plotted pairs in the
/// caption line under the title. Same determinism rules as the line chart.
/// The correlation is computed on the plotted (possibly log) coordinates.
inline std::string render_scatter_chart(const ScatterChartSpec& spec) {
    using namespace chart_detail;
    if (spec.xs.size() != spec.ys.size())
        throw std::invalid_argument("render_scatter_chart: length mismatch");

    std::vector<std::pair<double, double>> pts;
    Frame f;
    f.x_min = f.y_min = std::numeric_limits<double>::infinity();
    f.x_max = f.y_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        double x = spec.xs[i], y = spec.ys[i];
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        if (spec.log_x) {
            if (x <= 0.0) continue;
            x = std::log10(x);
        }
        if (spec.log_y) {
            if (y <= 0.0) continue;
            y = std::log10(y);
        }
        pts.push_back({x, y});
        f.x_min = std::min(f.x_min, x);
        f.x_max = std::max(f.x_max, x);
        f.y_min = std::min(f.y_min, y);
        f.y_max = std::max(f.y_max, y);
    }
    if (pts.empty()) {
        f.x_min = 0;
        f.x_max = 1;
        f.y_min = 0;
        f.y_max = 1;
    }
    pad_degenerate(&f.x_min, &f.x_max);
    pad_degenerate(&f.y_min, &f.y_max);

    std::vector<double> px_vals, py_vals;
    for (const auto& [x, y] : pts) {
        px_vals.push_back(x);
        py_vals.push_back(y);
    }
    double r = pearson(px_vals, py_vals);

    std::string out;
    open_svg(out, spec.title);
    char caption[96];
    std::snprintf(caption, sizeof(caption), "Pearson r = %.4f (n = %zu)", r, pts.size());
    out += "<text x=\"272\" y=\"40\" text-anchor=\"middle\" fill=\"#555555\">" +
           std::string(caption) + "</text>\n";
    std::string xl = spec.x_label + (spec.log_x ? " (log scale)" : "");
    draw_axes(out, f, xl, spec.y_label, spec.log_y);
    for (const auto& [x, y] : pts)
        out += "<circle cx=\"" + fmt6(f.px(x)) + "\" cy=\"" + fmt6(f.py(y)) +
               "\" r=\"2.5\" fill=\"" + std::string(palette(0)) +
               "\" fill-opacity=\"0.7\"/>\n";
    out += "</svg>\n";
    return out;
}

// ---------------------------------------------------------------------------
// Run comparison: align metric logs on a shared epoch grid and emit one
// combined CSV (long format, one row per method and epoch).

struct AlignedRuns {
    std::vector<std::string> names;
    std::vector<long> epochs;                      // shared grid (coarsest input grid)
    std::vector<std::vector<MetricRecord>> rows;   // [run][grid index]
    std::string warning;  // nonempty if grids differed and were resampled
};

/**
 * Aligns several metric logs by epoch. If all logs share one epoch grid
 * it is used as-is; otherwise every log is resampled onto the coarsest
 * grid (the log with the fewest records) by carrying the latest record
 * at or before each grid epoch forward, and `warning` describes the
 * resampling. A log whose first record is later than a grid point
 * contributes its first record there.
 */
inline AlignedRuns align_metric_logs(const std::vector<std::string>& names,
                                     const std::vector<MetricLog>& logs) {
    if (names.size() != logs.size())
        throw std::invalid_argument("align_metric_logs: name/log count mismatch");
    if (logs.empty()) throw std::invalid_argument("align_metric_logs: no runs");
    for (const MetricLog& log : logs)
        if (log.records.empty())
            throw std::invalid_argument("align_metric_logs: empty metric log");

    std::size_t coarsest = 0;
    bool mismatch = false;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (logs[i].records.size() < logs[coarsest].records.size()) coarsest = i;
        if (logs[i].records.size() != logs[0].records.size()) mismatch = true;
    }
    AlignedRuns out;
    out.names = names;
    for (const MetricRecord& r : logs[coarsest].records) out.epochs.push_back(r.epoch);
    if (!mismatch) {
        for (std::size_t i = 0; i < logs.size(); ++i)
            for (std::size_t j = 0; j < logs[i].records.size(); ++j)
                if (logs[i].records[j].epoch != out.epochs[j]) mismatch = true;
    }
    if (mismatch)
        out.warning = "warning: epoch grids differ; resampling all runs to the coarsest "
                      "grid (" +
                      std::to_string(out.epochs.size()) + " epochs, from '" +
                      names[coarsest] + "')";

    for (const MetricLog& log : logs) {
        std::vector<MetricRecord> row;
        for (long e : out.epochs) {
            std::size_t pick = 0;
            for (std::size_t j = 0; j < log.records.size(); ++j)
                if (log.records[j].epoch <= e) pick = j;
            row.push_back(log.records[pick]);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Long-format CSV over the aligned grid. Extra metric columns are
/// included only when every run reports the same extras.
inline std::string combined_csv(const AlignedRuns& aligned,
                                const std::vector<MetricLog>& logs) {
    bool same_extras = true;
    for (const MetricLog& log : logs)
        if (log.extra_names != logs[0].extra_names) same_extras = false;
    const std::vector<std::string> extras =
        same_extras ? logs[0].extra_names : std::vector<std::string>{};

    std::string out = "method,epoch,loss,mse,bellman,theta_norm,status,mse_grid";
    for (const std::string& e : extras) out += "," + e;
    out += "\n";
    for (std::size_t i = 0; i < aligned.rows.size(); ++i) {
        for (const MetricRecord& r : aligned.rows[i]) {
            out += aligned.names[i];
            out += "," + std::to_string(r.epoch);
            out += "," + trainer_detail::format_metric(r.loss);
            out += "," + trainer_detail::format_metric(r.mse);
            out += "," + trainer_detail::format_metric(r.bellman);
            out += "," + trainer_detail::format_metric(r.theta_norm);
            out += "," + r.status;
            out += "," + trainer_detail::format_metric(r.mse_grid);
            for (std::size_t e = 0; e < extras.size(); ++e)
                out += "," + trainer_detail::format_metric(
                                 e < r.extras.size()
                                     ? r.extras[e]
                                     : std::numeric_limits<double>::quiet_NaN());
            out += "\n";
        }
    }
    return out;
}

}  // namespace kbl
