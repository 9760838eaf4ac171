#include "spiketest/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace spiketest {

std::string format_full_precision(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& matrix, bool header) {
    std::ofstream out(path, std::ios::binary);  // keep LF endings everywhere
    if (!out) throw IoError("cannot write " + path);
    if (header) {
        for (int j = 0; j < matrix.cols(); ++j)
            out << (j ? "," : "") << "c" << (j + 1);
        out << "\n";
    }
    for (int i = 0; i < matrix.rows(); ++i) {
        for (int j = 0; j < matrix.cols(); ++j) {
            if (j) out << ",";
            out << format_full_precision(matrix(i, j));
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing " + path);
}

Matrix read_matrix_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool skipped_header = !header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path + ": cannot parse value '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": empty matrix");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

void write_provenance(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
}

}  // namespace spiketest
