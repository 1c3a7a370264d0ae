#include "support.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/kernels.hpp"

#include <doctest.h>
#include <omp.h>

using namespace pa1smt;
using testing::Rng;

namespace {

// Runs fn with several OpenMP threads even on a single-core machine.
template <typename Fn>
auto with_threads(int threads, Fn&& fn) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  auto out = fn();
  omp_set_num_threads(saved);
  return out;
}

bool identical(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial references") {
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    const Matrix x = rng.gaussian(rng.integer(1, 9), rng.integer(1, 70));
    const Matrix y = rng.gaussian(x.rows(), rng.integer(1, 40));
    const Matrix out = rng.gaussian(rng.integer(2, 6), rng.integer(1, 80));
    for (const int threads : {1, 3, 8}) {
      CHECK(identical(with_threads(threads, [&] { return kernels::parallel::cross_sq_dists(x, y); }),
                      kernels::serial::cross_sq_dists(x, y)));
      CHECK(identical(with_threads(threads, [&] { return kernels::parallel::pairwise_sq_dists(x); }),
                      kernels::serial::pairwise_sq_dists(x)));
      CHECK(identical(with_threads(threads, [&] { return kernels::parallel::gaussian_kernel(x, y, 1.3); }),
                      kernels::serial::gaussian_kernel(x, y, 1.3)));
      CHECK(identical(with_threads(threads, [&] { return kernels::parallel::code_sq_dists(out); }),
                      kernels::serial::code_sq_dists(out)));
      CHECK(identical(with_threads(threads, [&] { return kernels::parallel::memberships(out, 1e-12); }),
                      kernels::serial::memberships(out, 1e-12)));
    }
  }
}

TEST_CASE("serial kernels against scalar formulas") {
  Rng rng(12);
  const Matrix x = rng.gaussian(4, 7);
  const Matrix y = rng.gaussian(4, 5);
  const Matrix cross = kernels::serial::cross_sq_dists(x, y);
  const Matrix k = kernels::serial::gaussian_kernel(x, y, 0.9);
  for (Eigen::Index i = 0; i < 7; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double d2 = (x.col(i) - y.col(j)).squaredNorm();
      CHECK(std::abs(cross(i, j) - d2) <= 1e-12 * std::max(1.0, d2));
      CHECK(std::abs(k(i, j) - std::exp(-d2 / (2.0 * 0.81))) <= 1e-14);
    }
  }
  const Matrix out = rng.gaussian(3, 6);
  const Matrix codes = kernels::serial::code_sq_dists(out);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double d2 = (out.col(i) - Matrix::Identity(3, 3).col(c)).squaredNorm();
      CHECK(std::abs(codes(c, i) - d2) <= 1e-13);
    }
  }
  CHECK_THROWS_AS(kernels::serial::gaussian_kernel(x, y, 0.0), ConfigError);
  CHECK_THROWS_AS(kernels::parallel::gaussian_kernel(x, y, -1.0), ConfigError);
  CHECK(kernels::max_threads() >= 1);
}
