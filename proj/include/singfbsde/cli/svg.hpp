#pragma once

// Minimal static line plots.

#include "singfbsde/csv.hpp"

#include <sstream>

namespace singfbsde::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
    std::vector<std::string> notes;  ///< printed under the title
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
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

inline std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace detail

inline std::string render_svg(const Plot& p) {
    constexpr double W = 720, H = 460, L = 80, R = 170, Tp = 60, B = 60;
    auto tx = [&](double v) { return p.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return p.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!p.log_x || x > 0) && (!p.log_y || y > 0);
    };
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : p.series)
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            x0 = std::min(x0, tx(s.x[k]));
            x1 = std::max(x1, tx(s.x[k]));
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y1))) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - Tp - B); };

    static constexpr std::array<const char*, 8> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                       "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(p.title)
       << "</text>\n";
    for (std::size_t k = 0; k < p.notes.size(); ++k)
        os << "<text x=\"" << W / 2 << "\" y=\"" << 38 + 14 * k << "\" text-anchor=\"middle\" fill=\"#444\">"
           << detail::xml_escape(p.notes[k]) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << Tp << "\" width=\"" << W - L - R << "\" height=\"" << H - Tp - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Ticks in transformed coordinates; labels show the raw value.
    for (int k = 0; k <= 5; ++k) {
        const double fx = x0 + (x1 - x0) * k / 5.0, fy = y0 + (y1 - y0) * k / 5.0;
        const double sx = L + (W - L - R) * k / 5.0, sy = H - B - (H - Tp - B) * k / 5.0;
        os << "<line x1=\"" << sx << "\" y1=\"" << H - B << "\" x2=\"" << sx << "\" y2=\"" << H - B + 5
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << sx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
           << detail::short_num(p.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
        os << "<line x1=\"" << L - 5 << "\" y1=\"" << sy << "\" x2=\"" << L << "\" y2=\"" << sy
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
           << detail::short_num(p.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
       << detail::xml_escape(p.x_label + (p.log_x ? " (log)" : "")) << "</text>\n";
    os << "<text x=\"18\" y=\"" << (Tp + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << (Tp + H - B) / 2 << ")\">" << detail::xml_escape(p.y_label + (p.log_y ? " (log)" : "")) << "</text>\n";

    for (std::size_t s = 0; s < p.series.size(); ++s) {
        const auto& ser = p.series[s];
        const char* col = colors[s % colors.size()];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"";
        if (ser.dashed) os << " stroke-dasharray=\"5,4\"";
        os << " points=\"";
        for (std::size_t k = 0; k < std::min(ser.x.size(), ser.y.size()); ++k)
            if (usable(ser.x[k], ser.y[k])) os << detail::short_num(px(ser.x[k])) << ',' << detail::short_num(py(ser.y[k])) << ' ';
        os << "\"/>\n";
        const double ly = Tp + 14 + 18 * static_cast<double>(s);
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 34 << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"" << (ser.dashed ? " stroke-dasharray=\"5,4\"" : "")
           << "/>\n";
        os << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(ser.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace singfbsde::cli
