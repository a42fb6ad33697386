#pragma once

// CSV dataset files.
//
// Header row `u1,...,u<n_u>,y1,...,y<n_y>` (any column order), one sample per
// row. The sample rate is not part of the CSV: it comes from a sidecar
// `<file>.json` holding {"sample_rate": ...} or from the caller.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "grssnn/errors.hpp"
#include "grssnn/signal.hpp"

namespace grssnn {

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// column name "u3" -> ('u', 2)
inline std::optional<std::pair<char, int>> parse_channel(const std::string& name) {
    if (name.size() < 2 || (name[0] != 'u' && name[0] != 'y')) return std::nullopt;
    int idx = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
    if (ec != std::errc() || ptr != name.data() + name.size() || idx < 1) return std::nullopt;
    return std::pair{name[0], idx - 1};
}

}  // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    return std::filesystem::path(csv.string() + ".json");
}

/// Loads a CSV dataset. `sample_rate` overrides the sidecar value; one of the two must exist.
inline Dataset load_dataset(const std::filesystem::path& path, std::optional<double> sample_rate = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path.string());

    if (!sample_rate) {
        std::ifstream side(sidecar_path(path));
        if (!side) throw DataError("no sample rate given and no sidecar " + sidecar_path(path).string());
        try {
            sample_rate = nlohmann::json::parse(side).at("sample_rate").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("bad sidecar " + sidecar_path(path).string() + ": " + e.what());
        }
    }

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    const auto header = detail::split_csv_line(line);
    std::map<int, std::size_t> u_cols, y_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto ch = detail::parse_channel(header[c]);
        if (!ch) throw DataError(path.string() + ":1: unrecognized column '" + header[c] + "'");
        auto& target = ch->first == 'u' ? u_cols : y_cols;
        if (!target.emplace(ch->second, c).second)
            throw DataError(path.string() + ":1: duplicate column '" + header[c] + "'");
    }
    if (u_cols.empty()) throw DataError(path.string() + ": no input column (u1..)");
    if (y_cols.empty()) throw DataError(path.string() + ": no output column (y1..)");
    auto check_contiguous = [&](const std::map<int, std::size_t>& m, char what) {
        if (m.rbegin()->first != static_cast<int>(m.size()) - 1)
            throw DataError(path.string() + ":1: " + what + " columns are not numbered 1.." +
                            std::to_string(m.size()));
    };
    check_contiguous(u_cols, 'u');
    check_contiguous(y_cols, 'y');

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "'");
            if (!std::isfinite(v))
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
            row[c] = v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": no samples");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd u(n, static_cast<Eigen::Index>(u_cols.size()));
    Eigen::MatrixXd y(n, static_cast<Eigen::Index>(y_cols.size()));
    for (Eigen::Index k = 0; k < n; ++k) {
        for (const auto& [ch, c] : u_cols) u(k, ch) = rows[static_cast<std::size_t>(k)][c];
        for (const auto& [ch, c] : y_cols) y(k, ch) = rows[static_cast<std::size_t>(k)][c];
    }
    return Dataset(std::move(u), std::move(y), *sample_rate);
}

/// Writes the CSV with 17 significant digits plus the sample-rate sidecar.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    d.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    for (Eigen::Index j = 0; j < d.n_u(); ++j) out << (j ? "," : "") << 'u' << j + 1;
    for (Eigen::Index j = 0; j < d.n_y(); ++j) out << ",y" << j + 1;
    out << '\n';
    for (Eigen::Index k = 0; k < d.samples(); ++k) {
        for (Eigen::Index j = 0; j < d.n_u(); ++j) out << (j ? "," : "") << d.u(k, j);
        for (Eigen::Index j = 0; j < d.n_y(); ++j) out << ',' << d.y(k, j);
        out << '\n';
    }
    std::ofstream side(sidecar_path(path));
    side << nlohmann::json{{"sample_rate", d.sample_rate}}.dump(2) << '\n';
}

}  // namespace grssnn
