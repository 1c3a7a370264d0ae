#include "pa1smt/linalg.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/kernels.hpp"

#include <algorithm>
#include <string>

namespace pa1smt::linalg {
namespace {

using Index = Eigen::Index;

// A Cholesky factor whose smallest squared pivot is below this fraction of
// the largest is treated as a failed factorization.
constexpr double kSingularPivotRatio = 1e-14;
constexpr double kRidgeScale = 1e-10;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool factor_ok(const Eigen::LLT<Matrix>& llt, bool check_pivots) {
  if (llt.info() != Eigen::Success) return false;
  if (!check_pivots) return true;
  const Vector diag = llt.matrixLLT().diagonal();
  const double lo = diag.minCoeff();
  const double hi = diag.maxCoeff();
  return lo > 0.0 && lo * lo >= kSingularPivotRatio * hi * hi;
}

Eigen::LLT<Matrix> factor_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (factor_ok(llt, true)) return llt;
  const double n = static_cast<double>(a.rows());
  const double ridge = kRidgeScale * a.trace() / n;
  if (ridge > 0.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += ridge;
    llt.compute(shifted);
    if (factor_ok(llt, false)) return llt;
  }
  throw IndefiniteError("matrix is not positive definite (" + shape_str(a) +
                        ", trace " + std::to_string(a.trace()) + ")");
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw DataError(std::string(what) + " contains non-finite entries");
  }
}

void require_shape(const Matrix& m, Index rows, Index cols,
                   std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + " has shape " + shape_str(m) +
                         ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

SymEig sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw DimensionError("sym_eig needs a square matrix, got " + shape_str(s));
  }
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw SolverError("symmetric eigendecomposition did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw DimensionError("solve_spd: A is " + shape_str(a) + ", B is " +
                         shape_str(b));
  }
  return factor_spd(a).solve(b);
}

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& q) {
  const Index d = a.rows();
  const Index c = b.rows();
  if (a.cols() != d || b.cols() != c || q.rows() != d || q.cols() != c) {
    throw DimensionError("solve_sylvester: A " + shape_str(a) + ", B " +
                         shape_str(b) + ", Q " + shape_str(q));
  }
  Eigen::LLT<Matrix> base(a);
  if (!factor_ok(base, false)) {
    throw IndefiniteError("solve_sylvester: A is not positive definite");
  }

  const SymEig eig = sym_eig(b);
  const Matrix q_rot = q * eig.vectors;
  Matrix x_rot(d, c);
  Matrix shifted = a;
  double current_shift = 0.0;
  Eigen::LLT<Matrix> llt = base;
  for (Index k = 0; k < c; ++k) {
    const double mu = eig.values(k);
    if (mu != current_shift) {
      shifted.diagonal() = a.diagonal().array() + mu;
      llt.compute(shifted);
      if (!factor_ok(llt, false)) {
        throw IndefiniteError("solve_sylvester: shifted system is indefinite");
      }
      current_shift = mu;
    }
    x_rot.col(k) = llt.solve(q_rot.col(k));
  }
  return x_rot * eig.vectors.transpose();
}

Matrix pairwise_sq_dists(const Matrix& x) {
  return kernels::parallel::pairwise_sq_dists(x);
}

double l21_norm(const Matrix& m) { return m.rowwise().norm().sum(); }

}  // namespace pa1smt::linalg
