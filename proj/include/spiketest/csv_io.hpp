#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spiketest/spectrum.hpp"

namespace spiketest {

// Matrix CSV: one row per variable, full precision (17 significant digits),
// LF line endings, optional single header line of column names.
void write_matrix_csv(const std::string& path, const Matrix& matrix,
                      bool header = false);
Matrix read_matrix_csv(const std::string& path, bool header = false);

// Provenance sidecar: ordered `key = value` lines.
void write_provenance(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_full_precision(double value);

}  // namespace spiketest
