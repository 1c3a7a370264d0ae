#include "pa1smt/kernels.hpp"

#include "pa1smt/error.hpp"

#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pa1smt::kernels {
namespace {

using Index = Eigen::Index;

double column_sq_dist(const Matrix& x, Index i, const Matrix& y, Index j) {
  double acc = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const double diff = x(r, i) - y(r, j);
    acc += diff * diff;
  }
  return acc;
}

void check_same_dim(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) {
    throw DimensionError("feature dimension mismatch: " +
                         std::to_string(x.rows()) + " vs " +
                         std::to_string(y.rows()));
  }
}

void check_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ConfigError("gaussian kernel bandwidth must be positive and finite");
  }
}

// Fills column j of a symmetric distance matrix, entries i < j only.
void pairwise_column(const Matrix& x, Index j, Matrix& out) {
  for (Index i = 0; i < j; ++i) {
    out(i, j) = column_sq_dist(x, i, x, j);
  }
  out(j, j) = 0.0;
}

void mirror_upper(Matrix& out) {
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      out(j, i) = out(i, j);
    }
  }
}

void code_dist_column(const Matrix& outputs, Index i, Matrix& out) {
  const Index c = outputs.rows();
  double sq_norm = 0.0;
  for (Index r = 0; r < c; ++r) {
    sq_norm += outputs(r, i) * outputs(r, i);
  }
  // ||f - l_k||^2 = ||f||^2 - f_k^2 + (f_k - 1)^2, evaluated without
  // cancellation in the (f_k - 1) term.
  for (Index k = 0; k < c; ++k) {
    const double fk = outputs(k, i);
    const double rest = sq_norm - fk * fk;
    out(k, i) = (rest > 0.0 ? rest : 0.0) + (fk - 1.0) * (fk - 1.0);
  }
}

void membership_column(const Matrix& outputs, Index i, double hit_tol,
                       Matrix& out) {
  const Index c = outputs.rows();
  const double hit_sq = hit_tol * hit_tol;
  Index hits = 0;
  for (Index k = 0; k < c; ++k) {
    double d2 = 0.0;
    for (Index r = 0; r < c; ++r) {
      const double diff = outputs(r, i) - (r == k ? 1.0 : 0.0);
      d2 += diff * diff;
    }
    out(k, i) = d2;
    if (d2 <= hit_sq) ++hits;
  }
  if (hits > 0) {
    const double share = 1.0 / static_cast<double>(hits);
    for (Index k = 0; k < c; ++k) {
      out(k, i) = out(k, i) <= hit_sq ? share : 0.0;
    }
    return;
  }
  double total = 0.0;
  for (Index k = 0; k < c; ++k) {
    out(k, i) = 1.0 / out(k, i);
    total += out(k, i);
  }
  for (Index k = 0; k < c; ++k) {
    out(k, i) /= total;
  }
}

}  // namespace

namespace serial {

Matrix cross_sq_dists(const Matrix& x, const Matrix& y) {
  check_same_dim(x, y);
  Matrix out(x.cols(), y.cols());
  for (Index j = 0; j < y.cols(); ++j) {
    for (Index i = 0; i < x.cols(); ++i) {
      out(i, j) = column_sq_dist(x, i, y, j);
    }
  }
  return out;
}

Matrix pairwise_sq_dists(const Matrix& x) {
  Matrix out(x.cols(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    pairwise_column(x, j, out);
  }
  mirror_upper(out);
  return out;
}

Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth) {
  check_bandwidth(bandwidth);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix out = cross_sq_dists(x, y);
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      out(i, j) = std::exp(out(i, j) * scale);
    }
  }
  return out;
}

Matrix code_sq_dists(const Matrix& outputs) {
  Matrix out(outputs.rows(), outputs.cols());
  for (Index i = 0; i < outputs.cols(); ++i) {
    code_dist_column(outputs, i, out);
  }
  return out;
}

Matrix memberships(const Matrix& outputs, double hit_tol) {
  Matrix out(outputs.rows(), outputs.cols());
  for (Index i = 0; i < outputs.cols(); ++i) {
    membership_column(outputs, i, hit_tol, out);
  }
  return out;
}

}  // namespace serial

namespace parallel {

Matrix cross_sq_dists(const Matrix& x, const Matrix& y) {
  check_same_dim(x, y);
  Matrix out(x.cols(), y.cols());
  const Index m = y.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < x.cols(); ++i) {
      out(i, j) = column_sq_dist(x, i, y, j);
    }
  }
  return out;
}

Matrix pairwise_sq_dists(const Matrix& x) {
  Matrix out(x.cols(), x.cols());
  const Index n = x.cols();
  // Column j costs O(j); dynamic scheduling balances the triangle.
#pragma omp parallel for schedule(dynamic, 16)
  for (Index j = 0; j < n; ++j) {
    pairwise_column(x, j, out);
  }
  mirror_upper(out);
  return out;
}

Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth) {
  check_bandwidth(bandwidth);
  check_same_dim(x, y);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix out(x.cols(), y.cols());
  const Index m = y.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < x.cols(); ++i) {
      out(i, j) = std::exp(column_sq_dist(x, i, y, j) * scale);
    }
  }
  return out;
}

Matrix code_sq_dists(const Matrix& outputs) {
  Matrix out(outputs.rows(), outputs.cols());
  const Index n = outputs.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    code_dist_column(outputs, i, out);
  }
  return out;
}

Matrix memberships(const Matrix& outputs, double hit_tol) {
  Matrix out(outputs.rows(), outputs.cols());
  const Index n = outputs.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    membership_column(outputs, i, hit_tol, out);
  }
  return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace pa1smt::kernels
