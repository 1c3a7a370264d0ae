#pragma once

#include "pa1smt/linalg.hpp"

// Data-parallel inner loops of the solver and the preprocessing pipeline.
//
// Every kernel exists twice: `serial::` is the plain reference loop kept for
// testing and benchmarking, `parallel::` is the OpenMP version used by the
// library. Both visit columns independently and accumulate each output entry
// in the same order, so their results are bit-identical for any thread count.
namespace pa1smt::kernels {

namespace serial {

// out(i, j) = ||x_i - y_j||^2 over columns of x (d x n) and y (d x m).
Matrix cross_sq_dists(const Matrix& x, const Matrix& y);

// Symmetric n x n matrix of squared column distances with an exact zero
// diagonal.
Matrix pairwise_sq_dists(const Matrix& x);

// out(i, j) = exp(-||x_i - y_j||^2 / (2 bandwidth^2)).
Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth);

// outputs is C x n with column i = f(x_i). Returns C x n squared distances
// from each output to every one-hot code l_k.
Matrix code_sq_dists(const Matrix& outputs);

// Closed-form soft memberships from C x n decision outputs. Column i is
// proportional to the inverse squared distances to the codes; if any
// distance is at most hit_tol the mass is spread uniformly over those codes.
Matrix memberships(const Matrix& outputs, double hit_tol);

}  // namespace serial

namespace parallel {

Matrix cross_sq_dists(const Matrix& x, const Matrix& y);
Matrix pairwise_sq_dists(const Matrix& x);
Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth);
Matrix code_sq_dists(const Matrix& outputs);
Matrix memberships(const Matrix& outputs, double hit_tol);

}  // namespace parallel

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace pa1smt::kernels
