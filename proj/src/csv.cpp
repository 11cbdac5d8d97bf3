#include "igplvm/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace igplvm::csv {

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

bool parse_double(std::string_view s, double& v) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    return res.ec == std::errc{} && res.ptr == end;
}

}  // namespace

Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        bool bad = false;
        int bad_col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            double v;
            if (!parse_double(cell, v)) {
                bad = true;
                bad_col = col;
                break;
            }
            row.push_back(v);
        }
        if (bad) {
            if (first_data_row) continue;  // header row
            throw DomainError(path.string() + ": non-numeric cell at row " +
                              std::to_string(lineno) + ", column " +
                              std::to_string(bad_col));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DomainError(path.string() + ": ragged row " + std::to_string(lineno) +
                              " (" + std::to_string(row.size()) + " cells, expected " +
                              std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
        first_data_row = false;
    }
    if (rows.empty()) throw DomainError(path.string() + ": no numeric data");

    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

}  // namespace igplvm::csv
