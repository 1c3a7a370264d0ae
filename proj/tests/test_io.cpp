#include "support.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/io.hpp"

#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>

using namespace pa1smt;
using testing::Rng;
using testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

void write_raw_header(const std::filesystem::path& p, std::uint64_t rows,
                      std::uint64_t cols, std::size_t payload_doubles) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  const double zero = 0.0;
  for (std::size_t i = 0; i < payload_doubles; ++i) {
    out.write(reinterpret_cast<const char*>(&zero), 8);
  }
}

std::string error_text(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv: samples become columns") {
  TempDir dir("io");
  write_text(dir / "a.csv", "1,2,3\n4,5,6\n");
  const auto ds = io::load_matrix(dir / "a.csv", io::MatrixFormat::kCsv);
  REQUIRE(ds.x.rows() == 3);
  REQUIRE(ds.x.cols() == 2);
  CHECK(ds.x(0, 0) == 1.0);
  CHECK(ds.x(2, 0) == 3.0);
  CHECK(ds.x(0, 1) == 4.0);
  CHECK(!ds.labels);
}

TEST_CASE("csv: header, labels and diagnostics") {
  TempDir dir("io");
  write_text(dir / "h.csv", "f1,f2,label\n0.5,1.5,1\n2,3,0\n\n");
  const auto ds = io::load_matrix(dir / "h.csv", io::MatrixFormat::kCsv, true);
  CHECK(ds.x.rows() == 2);
  CHECK(ds.x.cols() == 2);
  REQUIRE(ds.labels);
  CHECK(*ds.labels == std::vector<int>{1, 0});

  write_text(dir / "bad.csv", "1,2\n3,x\n");
  const auto msg = error_text([&] { io::load_csv(dir / "bad.csv", false); });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("column 2") != std::string::npos);

  write_text(dir / "ragged.csv", "1,2\n3,4,5\n");
  CHECK_THROWS_AS(io::load_csv(dir / "ragged.csv", false), DataError);
  write_text(dir / "frac.csv", "1,2,0.5\n");
  CHECK_THROWS_AS(io::load_csv(dir / "frac.csv", true), DataError);
  write_text(dir / "empty.csv", "a,b\n");
  CHECK_THROWS_AS(io::load_csv(dir / "empty.csv", false), DataError);
  write_text(dir / "nan.csv", "1,nan\n");
  CHECK_THROWS_AS(io::load_csv(dir / "nan.csv", false), DataError);
  CHECK_THROWS_AS(io::load_csv(dir / "missing.csv", false), DataError);
}

TEST_CASE("raw: header checks") {
  TempDir dir("io");
  write_raw_header(dir / "zero.bin", 0, 4, 0);
  CHECK_THROWS_AS(io::load_raw(dir / "zero.bin"), DataError);
  write_raw_header(dir / "short.bin", 3, 4, 5);
  CHECK_THROWS_AS(io::load_raw(dir / "short.bin"), DataError);
  write_text(dir / "tiny.bin", "abc");
  CHECK_THROWS_AS(io::load_raw(dir / "tiny.bin"), DataError);
  CHECK_THROWS_AS(io::load_matrix(dir / "tiny.bin", io::MatrixFormat::kRaw, true), ConfigError);
}

TEST_CASE("raw: byte layout and bit-exact round trip") {
  TempDir dir("io");
  Rng rng(71);
  Matrix x = rng.gaussian(4, 7);
  x(1, 2) = 1e-310;  // subnormal
  x(3, 6) = -0.0;
  io::save_raw(dir / "m.bin", x);

  std::ifstream in(dir / "m.bin", std::ios::binary);
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  CHECK(rows == 7);  // samples are rows on disk
  CHECK(cols == 4);
  double first[2];
  in.read(reinterpret_cast<char*>(first), 16);
  CHECK(std::memcmp(&first[0], &x(0, 0), 8) == 0);
  CHECK(std::memcmp(&first[1], &x(1, 0), 8) == 0);

  const Matrix back = io::load_raw(dir / "m.bin");
  REQUIRE(back.rows() == 4);
  REQUIRE(back.cols() == 7);
  CHECK(std::memcmp(back.data(), x.data(), sizeof(double) * x.size()) == 0);
}

TEST_CASE("csv: round trip to 17 significant digits") {
  TempDir dir("io");
  Rng rng(72);
  for (int t = 0; t < 10; ++t) {
    Matrix x = rng.gaussian(rng.integer(1, 6), rng.integer(1, 30));
    x *= std::pow(10.0, rng.integer(-8, 8));
    const auto labels = rng.labels(x.cols(), 4);
    io::save_csv(dir / "m.csv", x, &labels);
    const auto ds = io::load_csv(dir / "m.csv", true);
    CHECK(testing::rel_diff(ds.x, x) <= 1e-12);
    CHECK((ds.x - x).cwiseAbs().maxCoeff() <= 1e-12 * x.cwiseAbs().maxCoeff());
    CHECK(*ds.labels == labels);
  }
  std::vector<int> wrong(3);
  CHECK_THROWS_AS(io::save_csv(dir / "w.csv", Matrix::Zero(2, 2), &wrong), DimensionError);
}

TEST_CASE("labels files and formats") {
  TempDir dir("io");
  const std::vector<int> labels{3, 0, 2, 2};
  io::save_labels(dir / "l.txt", labels);
  CHECK(io::load_labels(dir / "l.txt") == labels);
  write_text(dir / "bad.txt", "1\ntwo\n");
  CHECK_THROWS_AS(io::load_labels(dir / "bad.txt"), DataError);

  CHECK(io::parse_format("csv") == io::MatrixFormat::kCsv);
  CHECK(io::parse_format("raw-f64") == io::MatrixFormat::kRaw);
  CHECK(io::parse_format("raw") == io::MatrixFormat::kRaw);
  CHECK_THROWS_AS(io::parse_format("xlsx"), ConfigError);
  CHECK(io::format_for("a/b.csv") == io::MatrixFormat::kCsv);
  CHECK(io::format_for("a/b.bin") == io::MatrixFormat::kRaw);

  io::write_atomic(dir / "f.txt", "hello");
  std::ifstream in(dir / "f.txt");
  std::string s;
  in >> s;
  CHECK(s == "hello");
  CHECK(std::distance(std::filesystem::directory_iterator(dir.path()),
                      std::filesystem::directory_iterator{}) == 3);  // no temp file left
}
