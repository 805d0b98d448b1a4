#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "../control.hpp"
#include "matrix_io.hpp"

namespace detdyn::cli {

namespace detail {

inline std::string fmt(double x, const char* spec = "%.9g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

}  // namespace detail

/// Nested reachable ellipses of the regularized partial sums
/// W~_0(eps) = eps I, ..., W~_{Nm}(eps), one <path> per step. The plane is
/// drawn with y up; the view box is the common bounding box plus 10%.
inline std::string emit_ellipse_svg(const GramianBuild& g, double eps) {
    ::detdyn::detail::require(g.n() == 2, ErrorKind::NotTwoDimensional, "ellipse plot needs n = 2, got " + std::to_string(g.n()));
    ::detdyn::detail::require(eps > 0 && std::isfinite(eps), ErrorKind::InvalidArgument, "eps must be positive");
    const auto sums = regularized_partial_sums(g.directions, 2, eps);

    double hx = 0, hy = 0;
    for (const auto& w : sums) {
        hx = std::max(hx, std::sqrt(w(0, 0)));
        hy = std::max(hy, std::sqrt(w(1, 1)));
    }
    hx *= 1.1;
    hy *= 1.1;
    const double line_w = 0.004 * std::max(hx, hy);
    const double font = 0.045 * hy;

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"" +
         detail::fmt(640.0 * hy / hx, "%.0f") + "\" viewBox=\"" + detail::fmt(-hx) + " " + detail::fmt(-hy) + " " +
         detail::fmt(2 * hx) + " " + detail::fmt(2 * hy) + "\">\n";
    s += "<title>Reachable ellipses of the regularized Gramian partial sums, eps = " + format_double(eps) + "</title>\n";
    s += "<g transform=\"scale(1,-1)\" fill=\"none\" stroke-width=\"" + detail::fmt(line_w) + "\">\n";
    s += "<line x1=\"" + detail::fmt(-hx) + "\" y1=\"0\" x2=\"" + detail::fmt(hx) +
         "\" y2=\"0\" stroke=\"#bbbbbb\"/>\n";
    s += "<line x1=\"0\" y1=\"" + detail::fmt(-hy) + "\" x2=\"0\" y2=\"" + detail::fmt(hy) +
         "\" stroke=\"#bbbbbb\"/>\n";
    const std::size_t count = sums.size();
    std::string labels;
    for (std::size_t k = 0; k < count; ++k) {
        const auto e = reach_ellipse(sums[k]);
        const double c = std::cos(e.rotation_rad), sn = std::sin(e.rotation_rad);
        const double x0 = e.semi_axis_a * c, y0 = e.semi_axis_a * sn;
        const std::string rot = detail::fmt(e.rotation_rad * 180.0 / std::numbers::pi);
        const std::string arc = " A " + detail::fmt(e.semi_axis_a) + " " + detail::fmt(e.semi_axis_b) + " " + rot + " 1 0 ";
        const int shade = count > 1 ? static_cast<int>(40 + 160 * k / (count - 1)) : 120;
        char color[16];
        std::snprintf(color, sizeof color, "#%02x%02x%02x", 200 - shade * 3 / 4, 60 + shade / 4, shade);
        s += "<path id=\"ellipse-" + std::to_string(k) + "\" data-step=\"" + std::to_string(k) + "\" data-area=\"" +
             format_double(e.area) + "\" stroke=\"" + color + "\" d=\"M " + detail::fmt(x0) + " " + detail::fmt(y0) +
             arc + detail::fmt(-x0) + " " + detail::fmt(-y0) + arc + detail::fmt(x0) + " " + detail::fmt(y0) +
             " Z\"/>\n";
        labels += "<text x=\"" + detail::fmt(-hx + 0.5 * font) + "\" y=\"" +
                  detail::fmt(-hy + font * (1.4 + 1.2 * static_cast<double>(k))) + "\" font-size=\"" +
                  detail::fmt(font) + "\" fill=\"" + color + "\">l = " + std::to_string(k) +
                  "  area = " + detail::fmt(e.area, "%.6g") + "</text>\n";
    }
    s += "</g>\n";
    s += "<g font-family=\"monospace\">\n" + labels + "</g>\n";
    s += "</svg>\n";
    return s;
}

inline void write_ellipse_svg(const GramianBuild& g, double eps, const std::string& path) {
    const std::string doc = emit_ellipse_svg(g, eps);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
    out << doc;
}

}  // namespace detdyn::cli
