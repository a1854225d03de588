#include "otshift/errors.hpp"
#include "otshift/mixture.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace otshift {

namespace {

std::vector<std::string> split_row(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

LabeledSample load_feature_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open feature table " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw ConfigError(path.string() + ": empty file");
    const auto header = split_row(line);
    if (header.size() < 2 || trim(header[0]) != "label")
        throw ConfigError(path.string() + ": header must start with 'label' followed by feature columns");
    const auto d = static_cast<Eigen::Index>(header.size() - 1);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto cells = split_row(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (static_cast<Eigen::Index>(cells.size()) != d + 1)
            throw DimensionError(where + ": expected " + std::to_string(d + 1) + " columns");
        const std::string label_text = trim(cells[0]);
        int label = -1;
        auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
        if (ec != std::errc() || ptr != label_text.data() + label_text.size() || label < 0)
            throw ConfigError(where + ": label must be a non-negative integer");
        std::vector<double> row(static_cast<std::size_t>(d));
        for (Eigen::Index k = 0; k < d; ++k) {
            const std::string text = trim(cells[static_cast<std::size_t>(k + 1)]);
            std::size_t used = 0;
            try {
                row[static_cast<std::size_t>(k)] = std::stod(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (text.empty() || used != text.size() || !std::isfinite(row[static_cast<std::size_t>(k)]))
                throw ConfigError(where + ": feature '" + text + "' is not a finite number");
        }
        rows.push_back(std::move(row));
        labels.push_back(label);
    }
    if (rows.empty())
        throw ConfigError(path.string() + ": no data rows");

    LabeledSample out;
    out.points = Matrix(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index k = 0; k < d; ++k)
            out.points(static_cast<Eigen::Index>(r), k) = rows[r][static_cast<std::size_t>(k)];
    out.labels = std::move(labels);
    return out;
}

}  // namespace otshift
