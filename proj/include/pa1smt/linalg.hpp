#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace pa1smt {

// Dense real matrix. Data matrices are stored samples-as-columns (d x n).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

struct SymEig {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

bool all_finite(const Matrix& m);

// Throws DataError naming `what` if `m` holds a NaN or Inf.
void require_finite(const Matrix& m, std::string_view what);

// Throws DimensionError unless m is rows x cols.
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                   std::string_view what);

// Eigendecomposition of a symmetric matrix. The input is symmetrized as
// (S + S^T) / 2 before decomposing.
SymEig sym_eig(const Matrix& s);

// Solves A X = B for symmetric positive definite A by Cholesky. If the
// factorization fails, or its pivots show A to be numerically singular, the
// diagonal is shifted by 1e-10 * trace(A) / n and the factorization retried
// once. Throws IndefiniteError if that also fails.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Solves A X + X B = Q with A symmetric positive definite (d x d) and B
// symmetric positive semidefinite (c x c).
//
// B = P diag(mu) P^T is eigendecomposed, after which the equation decouples
// into c shifted systems (A + mu_k I) x_k = (Q P)_k that are each SPD. The
// result is X = [x_1 ... x_c] P^T. Cost is O(d^3 c + c^3), which is cheap
// because c is a category count.
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& q);

// Squared Euclidean distances between all pairs of columns of x (n x n).
Matrix pairwise_sq_dists(const Matrix& x);

// Sum of the Euclidean norms of the rows of m.
double l21_norm(const Matrix& m);

}  // namespace linalg
}  // namespace pa1smt
