#include "otshift/svg.hpp"

#include "otshift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace otshift {

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 220.0;
constexpr double kTop = 40.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kPad = 30.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s)
{
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

std::string num(double v)
{
    std::ostringstream o;
    o << std::setprecision(4) << v;
    return o.str();
}

}  // namespace

std::string render_line_charts(const std::string& title, const std::vector<Panel>& panels)
{
    const double height = kTop + static_cast<double>(panels.size()) * (kPanelHeight + kPad) + kPad;
    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& panel = panels[p];
        const double y0 = kTop + static_cast<double>(p) * (kPanelHeight + kPad) + kPad;
        const double plot_w = kWidth - kLeft - kRight;
        const double plot_h = kPanelHeight - kPad;

        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : panel.series)
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                    continue;
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        if (!std::isfinite(xmin)) {
            xmin = 0.0;
            xmax = 1.0;
            ymin = 0.0;
            ymax = 1.0;
        }
        if (xmax == xmin)
            xmax = xmin + 1.0;
        if (ymax == ymin) {
            ymin -= 0.5;
            ymax += 0.5;
        }
        const double margin = 0.05 * (ymax - ymin);
        ymin -= margin;
        ymax += margin;
        auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
        auto py = [&](double y) { return y0 + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };

        svg << "<text x=\"" << kLeft << "\" y=\"" << y0 - 8 << "\" font-size=\"12\">" << escape(panel.title)
            << "</text>\n";
        svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\"" << plot_h
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            const double yv = ymin + (ymax - ymin) * t / 4.0;
            const double xv = xmin + (xmax - xmin) * t / 4.0;
            svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
                << "</text>\n";
            svg << "<text x=\"" << px(xv) << "\" y=\"" << y0 + plot_h + 14 << "\" text-anchor=\"middle\">"
                << num(xv) << "</text>\n";
        }
        for (std::size_t k = 0; k < panel.series.size(); ++k) {
            const Series& s = panel.series[k];
            const char* color = kColors[k % std::size(kColors)];
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            svg << "\"/>\n";
            const double ly = y0 + 14.0 * static_cast<double>(k + 1);
            svg << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 28
                << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
            svg << "<text x=\"" << kWidth - kRight + 32 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_line_charts(const std::filesystem::path& path, const std::string& title, const std::vector<Panel>& panels)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << render_line_charts(title, panels);
}

}  // namespace otshift
