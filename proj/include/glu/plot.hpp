#pragma once
// Minimal static SVG figures: line plots and heatmaps.

#include <string>
#include <vector>

namespace glu::plot {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Axes {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
};

std::string line_plot_svg(const Axes& axes, const std::vector<Series>& series);
/// Row-major ny x nx grid, row 0 drawn at the top.
std::string heatmap_svg(const std::string& title, const std::vector<double>& values, std::size_t ny, std::size_t nx);

void write_file(const std::string& path, const std::string& contents);

}  // namespace glu::plot
