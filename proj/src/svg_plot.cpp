#include "platoon/svg_plot.hpp"

#include "platoon/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace platoon {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 450.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
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

// Roughly five ticks at 1, 2 or 5 times a power of ten.
double tick_step(double span) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string svg_line_plot(const std::vector<double>& x, const Matrix& y, const PlotLabels& labels,
                          std::size_t max_points) {
    if (static_cast<Eigen::Index>(x.size()) != y.rows())
        fail(ErrorKind::DimensionMismatch, "svg_line_plot: x and y lengths differ");
    double x0 = x.empty() ? 0.0 : x.front(), x1 = x.empty() ? 1.0 : x.back();
    double y0 = y.size() ? y.minCoeff() : 0.0, y1 = y.size() ? y.maxCoeff() : 1.0;
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-9) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
    auto sy = [&](double v) { return kTop + (y1 - v) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"16\">"
       << escape(labels.title) << "</text>\n";

    // Grid and tick labels.
    os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    const double xs = tick_step(x1 - x0);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
        os << "<line x1=\"" << sx(t) << "\" y1=\"" << kTop << "\" x2=\"" << sx(t) << "\" y2=\"" << kTop + ph
           << "\" stroke=\"#e5e5e5\"/>\n";
        os << "<text x=\"" << sx(t) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << std::setprecision(6)
           << std::defaultfloat << t << std::fixed << std::setprecision(2) << "</text>\n";
    }
    const double ys = tick_step(y1 - y0);
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
        os << "<line x1=\"" << kLeft << "\" y1=\"" << sy(t) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << sy(t)
           << "\" stroke=\"#e5e5e5\"/>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">" << std::setprecision(6)
           << std::defaultfloat << t << std::fixed << std::setprecision(2) << "</text>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(labels.x_label)
       << "</text>\n";
    os << "<text transform=\"translate(18," << kTop + ph / 2
       << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
       << escape(labels.y_label) << "</text>\n";

    const std::size_t stride = std::max<std::size_t>(1, (x.size() + max_points - 1) / std::max<std::size_t>(1, max_points));
    const Eigen::Index series = y.cols();
    // Drawn back to front so the highlighted first series stays on top.
    for (Eigen::Index c = series - 1; c >= 0; --c) {
        std::string colour = "#1f4e9c";
        double width = 1.6;
        if (c > 0) {
            const int g = 120 + static_cast<int>(100.0 * static_cast<double>(c) / static_cast<double>(series));
            std::ostringstream col;
            col << "rgb(" << g << ',' << g << ',' << g << ')';
            colour = col.str();
            width = 0.9;
        }
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << width << "\" points=\"";
        for (std::size_t k = 0; k < x.size(); k += stride) {
            os << sx(x[k]) << ',' << sy(y(static_cast<Eigen::Index>(k), c)) << ' ';
        }
        if (!x.empty() && (x.size() - 1) % stride != 0)
            os << sx(x.back()) << ',' << sy(y(static_cast<Eigen::Index>(x.size() - 1), c));
        os << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace platoon
