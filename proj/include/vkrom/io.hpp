#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vkrom/buckling.hpp"
#include "vkrom/continuation.hpp"
#include "vkrom/errors.hpp"
#include "vkrom/rom.hpp"

namespace vkrom {

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    }
    out << std::setprecision(15);
    return out;
}

} // namespace detail

/// index, value, multiplicity (of the cluster the value belongs to).
inline void write_eigs_csv(const std::filesystem::path& path, const std::vector<EigenPair>& pairs)
{
    std::vector<double> values;
    for (const auto& p : pairs) {
        values.push_back(p.value);
    }
    auto out = detail::open_output(path);
    out << "index,value,multiplicity\n";
    std::size_t i = 0;
    for (const auto& [value, mult] : cluster_values(values)) {
        for (int r = 0; r < mult; ++r, ++i) {
            out << i + 1 << ',' << values[i] << ',' << mult << '\n';
        }
    }
}

inline void write_spectrum_csv(const std::filesystem::path& path, const SpectrumTrace& trace)
{
    auto out = detail::open_output(path);
    out << "lambda";
    for (std::size_t c = 0; c < trace.sigma_curves.size(); ++c) {
        out << ",sigma_" << c + 1;
    }
    out << '\n';
    for (std::size_t g = 0; g < trace.lambda_grid.size(); ++g) {
        out << trace.lambda_grid[g];
        for (const auto& curve : trace.sigma_curves) {
            out << ',' << curve[g];
        }
        out << '\n';
    }
}

inline void write_diagram_csv(const std::filesystem::path& path, const std::vector<Branch>& branches)
{
    auto out = detail::open_output(path);
    out << "branch_id,seed_m,seed_n,seed_sign,psi,lambda,ordinate,converged,iterations\n";
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto& br = branches[b];
        for (const auto& p : br.points) {
            out << b << ',' << br.seed.m << ',' << br.seed.n << ',' << (br.seed.sign > 0 ? "+1" : "-1") << ','
                << p.psi << ',' << p.lambda << ',' << p.ordinate << ',' << (p.converged ? 1 : 0) << ','
                << p.iterations << '\n';
        }
    }
}

/// psi, lambda, ordinate, plus the detected critical load of that psi row
/// (empty when the branch never left the trivial solution).
inline void write_sweep2d_csv(const std::filesystem::path& path, const std::vector<PsiSweepRow>& rows)
{
    auto out = detail::open_output(path);
    out << "psi,lambda,ordinate,critical_load\n";
    for (const auto& row : rows) {
        for (const auto& p : row.branch.points) {
            out << row.psi << ',' << p.lambda << ',' << p.ordinate << ',';
            if (row.critical_load) {
                out << *row.critical_load;
            }
            out << '\n';
        }
    }
}

inline void write_rb_error_csv(const std::filesystem::path& path, const std::vector<RbErrorReport>& reports)
{
    auto out = detail::open_output(path);
    out << "N,E_N,t_online_ms,t_full_ms\n";
    for (const auto& r : reports) {
        out << r.N << ',' << r.error << ',' << r.mean_online_ms << ',' << r.mean_full_ms << '\n';
    }
}

/// One polyline of a line plot.
struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
};

namespace detail {

inline std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Tick positions at 1, 2 or 5 times a power of ten.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6)
{
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (span / step <= target) {
            break;
        }
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
        ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
    }
    return ticks;
}

} // namespace detail

/// Minimal static SVG line chart; enough to eyeball diagrams and spectra.
inline void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec,
                           const std::vector<PlotSeries>& series)
{
    constexpr double width = 720.0;
    constexpr double height = 480.0;
    constexpr double left = 70.0;
    constexpr double right = 150.0;
    constexpr double top = 40.0;
    constexpr double bottom = 55.0;
    static const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
    double x0 = std::numeric_limits<double>::infinity();
    double x1 = -x0;
    double y0 = x0;
    double y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) {
                continue;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    }
    if (x1 - x0 < 1e-12) {
        x1 = x0 + 1.0;
    }
    if (y1 - y0 < 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };
    auto pyt = [&](double t) { return top + (1.0 - (t - y0) / (y1 - y0)) * ph; };

    auto out = detail::open_output(path);
    out << std::setprecision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::xml_escape(spec.title) << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (double t : detail::nice_ticks(x0, x1)) {
        out << "<line x1=\"" << px(t) << "\" y1=\"" << top + ph << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph + 5
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << t
            << "</text>\n";
    }
    for (double t : detail::nice_ticks(y0, y1)) {
        out << "<line x1=\"" << left - 5 << "\" y1=\"" << pyt(t) << "\" x2=\"" << left << "\" y2=\"" << pyt(t)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << pyt(t) + 4 << "\" text-anchor=\"end\">";
        if (spec.log_y) {
            out << "1e" << t;
        } else {
            out << t;
        }
        out << "</text>\n";
    }
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
        << detail::xml_escape(spec.x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::xml_escape(spec.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.y[i]) && (!spec.log_y || s.y[i] > 0.0)) {
                out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            }
        }
        out << "\"/>\n";
        const double ly = top + 14.0 + 18.0 * static_cast<double>(k);
        out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\""
            << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(s.label)
            << "</text>\n";
    }
    out << "</svg>\n";
}

inline std::vector<PlotSeries> diagram_series(const std::vector<Branch>& branches)
{
    std::vector<PlotSeries> series;
    for (const auto& b : branches) {
        PlotSeries s;
        s.label = "(" + std::to_string(b.seed.m) + "," + std::to_string(b.seed.n) + ")" + (b.seed.sign > 0 ? "+" : "-");
        for (const auto& p : b.points) {
            if (p.converged) {
                s.x.push_back(p.lambda);
                s.y.push_back(p.ordinate);
            }
        }
        series.push_back(std::move(s));
    }
    return series;
}

} // namespace vkrom
