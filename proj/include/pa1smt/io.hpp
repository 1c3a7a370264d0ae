#pragma once

#include "pa1smt/linalg.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Matrix files. On disk every format stores one sample per row; in memory
// samples are columns (d x n). This module owns the transpose.
//
// CSV:     optional header line, numeric fields, optionally a final integer
//          label column.
// raw-f64: u64 rows, u64 cols, then rows*cols f64 in row-major order, all
//          little-endian.
namespace pa1smt::io {

enum class MatrixFormat { kCsv, kRaw };

struct Dataset {
  Matrix x;                                 // d x n
  std::optional<std::vector<int>> labels;   // one per sample
};

// Parses "csv" / "raw" (also "raw-f64").
MatrixFormat parse_format(std::string_view name);

// Picks the format from the file extension: .csv is CSV, anything else raw.
MatrixFormat format_for(const std::filesystem::path& path);

Dataset load_csv(const std::filesystem::path& path, bool label_column);
Matrix load_raw(const std::filesystem::path& path);
Dataset load_matrix(const std::filesystem::path& path, MatrixFormat format,
                    bool label_column = false);

// Writes x (d x n) as n rows with 17 significant digits, plus a trailing
// label column when labels are given.
void save_csv(const std::filesystem::path& path, const Matrix& x,
              const std::vector<int>* labels = nullptr);
void save_raw(const std::filesystem::path& path, const Matrix& x);

std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path,
                 const std::vector<int>& labels);

// Writes `contents` to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace pa1smt::io
