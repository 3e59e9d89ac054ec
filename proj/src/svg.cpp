#include "glocad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace glocad::svg {

namespace {

constexpr double kW = 640, kH = 480, kPad = 56;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

struct Frame {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

    void include(double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    void pad() {
        if (x1 - x0 < 1e-12) x1 = x0 + 1;
        if (y1 - y0 < 1e-12) y1 = y0 + 1;
        const double dx = 0.04 * (x1 - x0), dy = 0.04 * (y1 - y0);
        x0 -= dx, x1 += dx, y0 -= dy, y1 += dy;
    }
    double px(double x) const { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); }
    double py(double y) const { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); }
};

Frame empty_frame() {
    Frame f;
    f.x0 = f.y0 = std::numeric_limits<double>::infinity();
    f.x1 = f.y1 = -std::numeric_limits<double>::infinity();
    return f;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

void header(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
            const std::string& yl) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n"
       << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\"" << kH - 2 * kPad
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4, yv = f.y0 + (f.y1 - f.y0) * i / 4;
        os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\">" << tick(xv)
           << "</text>\n"
           << "<text x=\"" << kPad - 6 << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
           << "</text>\n";
    }
    if (!xl.empty())
        os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
    if (!yl.empty())
        os << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kH / 2
           << ")\">" << escape(yl) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = kPad + 14 + 14.0 * static_cast<double>(i);
        os << "<rect x=\"" << kW - kPad - 110 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\""
           << kPalette[i % 7] << "\"/>\n"
           << "<text x=\"" << kW - kPad - 96 << "\" y=\"" << y + 1 << "\">" << escape(labels[i]) << "</text>\n";
    }
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel) {
    Frame f = empty_frame();
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) f.include(s.x[i], s.y[i]);
    if (!std::isfinite(f.x0)) f = Frame{};
    f.pad();
    std::ostringstream os;
    header(os, f, title, xlabel, ylabel);
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % 7] << "\" points=\"";
        // Thin long series to about 2000 vertices.
        const std::size_t n = std::min(s.x.size(), s.y.size());
        const std::size_t stride = std::max<std::size_t>(1, n / 2000);
        for (std::size_t i = 0; i < n; i += stride) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
        }
        os << "\"/>\n";
        labels.push_back(s.label);
    }
    legend(os, labels);
    os << "</svg>\n";
    return os.str();
}

std::string scatter_plot(const std::vector<PointSet>& sets, const std::string& title) {
    Frame f = empty_frame();
    for (const auto& s : sets)
        for (Eigen::Index i = 0; i < s.points.rows(); ++i) f.include(s.points(i, 0), s.points(i, 1));
    if (!std::isfinite(f.x0)) f = Frame{};
    f.pad();
    std::ostringstream os;
    header(os, f, title, "x0", "x1");
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto& s = sets[k];
        os << "<g fill=\"" << kPalette[k % 7] << "\" fill-opacity=\"0.6\">\n";
        for (Eigen::Index i = 0; i < s.points.rows(); ++i)
            os << "<circle cx=\"" << num(f.px(s.points(i, 0))) << "\" cy=\"" << num(f.py(s.points(i, 1))) << "\" r=\""
               << s.radius << "\"/>\n";
        os << "</g>\n";
        labels.push_back(s.label);
    }
    legend(os, labels);
    os << "</svg>\n";
    return os.str();
}

std::string quiver_plot(const std::vector<PortraitNode>& nodes, const std::string& title) {
    Frame f = empty_frame();
    for (const auto& n : nodes) f.include(n.x, n.y);
    if (!std::isfinite(f.x0)) f = Frame{};
    // Arrow length is 80% of the smallest lattice spacing in pixels.
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double d = std::max(std::abs(nodes[i].x - nodes[0].x), std::abs(nodes[i].y - nodes[0].y));
        if (d > 0) spacing = std::min(spacing, d);
    }
    f.pad();
    std::ostringstream os;
    header(os, f, title, "m_q", "v");
    const double unit = std::isfinite(spacing) ? 0.8 * spacing : 0.1 * (f.x1 - f.x0);
    double vmax = 0;
    for (const auto& n : nodes) vmax = std::max(vmax, std::hypot(n.dx, n.dy));
    for (const auto& n : nodes) {
        const double speed = std::hypot(n.dx, n.dy);
        const double x0 = f.px(n.x), y0 = f.py(n.y);
        if (!(speed > 0) || !std::isfinite(speed)) {
            os << "<circle cx=\"" << num(x0) << "\" cy=\"" << num(y0) << "\" r=\"1.5\" fill=\"#999\"/>\n";
            continue;
        }
        const double x1 = f.px(n.x + unit * n.dx / speed), y1 = f.py(n.y + unit * n.dy / speed);
        const double shade = vmax > 0 ? std::clamp(1 + std::log10(speed / vmax) / 6, 0.0, 1.0) : 0;
        const int red = static_cast<int>(40 + 200 * shade), blue = static_cast<int>(200 - 160 * shade);
        os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y1)
           << "\" stroke=\"rgb(" << red << ",60," << blue << ")\" stroke-width=\"1.2\"/>\n"
           << "<circle cx=\"" << num(x1) << "\" cy=\"" << num(y1) << "\" r=\"1.6\" fill=\"rgb(" << red << ",60," << blue
           << ")\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace glocad::svg
