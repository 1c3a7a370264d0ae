#include "pa1smt/io.hpp"

#include "pa1smt/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pa1smt::io {
namespace {

using Index = Eigen::Index;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    fields.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return fields;
}

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* begin = field.data();
  if (*begin == '+') ++begin;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T from_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  return value;
}

template <typename T>
void append_little_endian(std::string& out, T value) {
  value = from_little_endian(value);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace

MatrixFormat parse_format(std::string_view name) {
  if (name == "csv") return MatrixFormat::kCsv;
  if (name == "raw" || name == "raw-f64") return MatrixFormat::kRaw;
  throw ConfigError("unknown matrix format '" + std::string(name) + "'");
}

MatrixFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::kCsv : MatrixFormat::kRaw;
}

Dataset load_csv(const std::filesystem::path& path, bool label_column) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], values[c])) {
        numeric = false;
        bad = c;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = fields.size();  // header line
        continue;
      }
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ", column " + std::to_string(bad + 1) +
                      ": not a number: '" + fields[bad] + "'");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(width));
    }
    if (label_column) {
      const double label = values.back();
      if (label != std::floor(label) || std::abs(label) > 1e9) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": label '" + fields.back() + "' is not an integer");
      }
      labels.push_back(static_cast<int>(label));
      values.pop_back();
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  const Index dim = static_cast<Index>(rows.front().size());
  if (dim == 0) throw DataError(path.string() + ": no feature columns");

  Dataset out;
  out.x.resize(dim, static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index r = 0; r < dim; ++r) out.x(r, static_cast<Index>(i)) = rows[i][r];
  }
  if (!out.x.allFinite()) {
    throw DataError(path.string() + ": contains non-finite values");
  }
  if (label_column) out.labels = std::move(labels);
  return out;
}

Matrix load_raw(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16) {
    throw DataError(path.string() + ": raw file shorter than its header");
  }
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::memcpy(&rows, bytes.data(), 8);
  std::memcpy(&cols, bytes.data() + 8, 8);
  rows = from_little_endian(rows);
  cols = from_little_endian(cols);
  if (rows == 0 || cols == 0) {
    throw DataError(path.string() + ": raw header has a zero dimension (" +
                    std::to_string(rows) + ", " + std::to_string(cols) + ")");
  }
  if (rows > (1ull << 32) || cols > (1ull << 32) ||
      bytes.size() != 16 + rows * cols * 8) {
    throw DataError(path.string() + ": raw header (" + std::to_string(rows) +
                    ", " + std::to_string(cols) + ") does not match size " +
                    std::to_string(bytes.size()));
  }
  Matrix x(static_cast<Index>(cols), static_cast<Index>(rows));
  const char* p = bytes.data() + 16;
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t c = 0; c < cols; ++c, p += 8) {
      double v;
      std::memcpy(&v, p, 8);
      x(static_cast<Index>(c), static_cast<Index>(i)) = from_little_endian(v);
    }
  }
  if (!x.allFinite()) throw DataError(path.string() + ": non-finite values");
  return x;
}

Dataset load_matrix(const std::filesystem::path& path, MatrixFormat format,
                    bool label_column) {
  if (format == MatrixFormat::kCsv) return load_csv(path, label_column);
  if (label_column) {
    throw ConfigError("raw matrices carry no label column; use a labels file");
  }
  return {load_raw(path), std::nullopt};
}

void save_csv(const std::filesystem::path& path, const Matrix& x,
              const std::vector<int>* labels) {
  if (labels && static_cast<Index>(labels->size()) != x.cols()) {
    throw DimensionError("save_csv: label count does not match sample count");
  }
  std::string out;
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index r = 0; r < x.rows(); ++r) {
      if (r > 0) out += ',';
      out += format_double(x(r, i));
    }
    if (labels) {
      out += ',';
      out += std::to_string((*labels)[i]);
    }
    out += '\n';
  }
  write_atomic(path, out);
}

void save_raw(const std::filesystem::path& path, const Matrix& x) {
  std::string out;
  out.reserve(16 + static_cast<std::size_t>(x.size()) * 8);
  append_little_endian<std::uint64_t>(out, static_cast<std::uint64_t>(x.cols()));
  append_little_endian<std::uint64_t>(out, static_cast<std::uint64_t>(x.rows()));
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index r = 0; r < x.rows(); ++r) append_little_endian(out, x(r, i));
  }
  write_atomic(path, out);
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string field = trim(line);
    if (field.empty()) continue;
    int value = 0;
    const auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      if (labels.empty() && line_no == 1) continue;  // header
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": not an integer label: '" + field + "'");
    }
    labels.push_back(value);
  }
  return labels;
}

void save_labels(const std::filesystem::path& path,
                 const std::vector<int>& labels) {
  std::string out;
  for (const int y : labels) {
    out += std::to_string(y);
    out += '\n';
  }
  write_atomic(path, out);
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pa1smt::io
