#pragma once

#include "igplvm/types.hpp"

#include <filesystem>

namespace igplvm::csv {

/// Write a matrix as plain CSV, one matrix row per line, 17 significant
/// digits, LF line endings.
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Read a numeric CSV. A non-numeric first row is treated as a header and
/// skipped. Ragged rows or non-numeric cells raise DomainError with the
/// offending row/column.
Matrix read_matrix(const std::filesystem::path& path);

}  // namespace igplvm::csv
