#pragma once

// Minimal SVG line plots (one polyline per column).

#include "platoon/linalg.hpp"

#include <string>
#include <vector>

namespace platoon {

struct PlotLabels {
    std::string title;
    std::string x_label;
    std::string y_label;
};

// `y` has one row per entry of `x` and one column per series. At most
// `max_points` points per series are drawn.
[[nodiscard]] std::string svg_line_plot(const std::vector<double>& x, const Matrix& y, const PlotLabels& labels,
                                        std::size_t max_points = 1500);

}  // namespace platoon
