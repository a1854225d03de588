#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace otshift {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string title;
    std::vector<Series> series;
};

// Standalone SVG with one stacked line chart per panel.
std::string render_line_charts(const std::string& title, const std::vector<Panel>& panels);
void write_line_charts(const std::filesystem::path& path, const std::string& title, const std::vector<Panel>& panels);

}  // namespace otshift
