#include "glu/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glu::plot {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 150, kT = 40, kB = 55;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(3);
    o << v;
    return o.str();
}

// Viridis-like ramp from five anchors.
std::string ramp(double t) {
    static const double a[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(int(t), 3);
    const double f = t - i;
    std::ostringstream o;
    o << "rgb(";
    for (int c = 0; c < 3; ++c) o << int(std::lround(a[i][c] + f * (a[i + 1][c] - a[i][c]))) << (c < 2 ? "," : ")");
    return o.str();
}

}  // namespace

std::string line_plot_svg(const Axes& ax, const std::vector<Series>& series) {
    auto tx = [&](double v) { return ax.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return ax.logy ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("line_plot_svg: series '" + s.name + "' x/y mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((ax.logx && !(s.x[i] > 0)) || (ax.logy && !(s.y[i] > 0)) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i])), x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pw = kW - kL - kR, ph = kH - kT - kB;
    auto px = [&](double v) { return kL + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return kT + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(ax.title) << "</text>\n";
    o << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
        const double gx = kL + pw * i / 4.0, gy = kT + ph - ph * i / 4.0;
        o << "<text x=\"" << gx << "\" y=\"" << kT + ph + 16 << "\" text-anchor=\"middle\">"
          << fmt(ax.logx ? std::pow(10.0, fx) : fx) << "</text>\n";
        o << "<text x=\"" << kL - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
          << fmt(ax.logy ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    o << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << esc(ax.xlabel)
      << "</text>\n";
    o << "<text transform=\"translate(16," << kT + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(ax.ylabel)
      << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = kColors[s % 8];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            const double x = series[s].x[i], y = series[s].y[i];
            if ((ax.logx && !(x > 0)) || (ax.logy && !(y > 0)) || !std::isfinite(y)) continue;
            o << px(x) << "," << py(y) << " ";
        }
        o << "\"/>\n";
        const double ly = kT + 14 + 18.0 * double(s);
        o << "<line x1=\"" << kW - kR + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kW - kR + 35 << "\" y=\"" << ly + 4 << "\">" << esc(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string heatmap_svg(const std::string& title, const std::vector<double>& v, std::size_t ny, std::size_t nx) {
    if (v.size() != ny * nx || v.empty()) throw std::invalid_argument("heatmap_svg: size mismatch");
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, span = *mx > *mn ? *mx - *mn : 1.0;
    const double cell = std::max(2.0, 360.0 / double(std::max(nx, ny)));
    const double w = cell * double(nx), h = cell * double(ny);
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 120 << "\" height=\"" << h + 60
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << (w + 120) / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
      << "</text>\n";
    for (std::size_t r = 0; r < ny; ++r)
        for (std::size_t c = 0; c < nx; ++c)
            o << "<rect x=\"" << 10 + cell * double(c) << "\" y=\"" << 35 + cell * double(r) << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"" << ramp((v[r * nx + c] - lo) / span) << "\"/>\n";
    for (int i = 0; i <= 10; ++i)
        o << "<rect x=\"" << w + 25 << "\" y=\"" << 35 + h * (10 - i) / 11.0 << "\" width=\"16\" height=\""
          << h / 11.0 + 0.5 << "\" fill=\"" << ramp(i / 10.0) << "\"/>\n";
    o << "<text x=\"" << w + 46 << "\" y=\"" << 45 << "\">" << fmt(*mx) << "</text>\n";
    o << "<text x=\"" << w + 46 << "\" y=\"" << 35 + h << "\">" << fmt(lo) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << contents;
}

}  // namespace glu::plot
