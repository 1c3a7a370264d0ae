#pragma once

#include "pa1smt/linalg.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Soft large margin clustering: a linear decision function f(x) = W^T x is
// fitted so that every sample lands near the one-hot code l_k of the cluster
// it softly belongs to.
//
// Conventions shared with the adaptation solver:
//   X  d x n   samples as columns
//   W  d x C   model parameter
//   U  C x n   memberships, each column on the probability simplex
namespace pa1smt::slmc {

// Distances at or below this count as an exact hit on a cluster code.
inline constexpr double kExactHitTol = 1e-12;

struct SourceModel {
  Matrix w;                    // d x C_S
  Eigen::Index categories = 0;
  std::vector<int> label_map;  // label_map[k] = class id encoded by column k

  Eigen::Index dim() const { return w.rows(); }
};

// Closed-form membership update for fixed W. Columns are proportional to
// ||W^T x_i - l_k||^-2; exact hits take all the mass, shared uniformly.
Matrix update_membership(const Matrix& w, const Matrix& x);

// X diag(sum_k u_ki^2) X^T, the data term of the W normal equations.
Matrix weighted_scatter(const Matrix& x, const Matrix& u);

// X (U .* U)^T, the right-hand side contributed by the clustering term.
Matrix membership_targets(const Matrix& x, const Matrix& u);

// Minimizes the clustering objective over W for fixed U:
// (I + lambda X Uhat X^T) W = lambda X (U .* U)^T.
Matrix solve_w(const Matrix& x, const Matrix& u, double lambda);

// 1/2 ||W||_F^2 + lambda/2 sum_k sum_i u_ki^2 ||W^T x_i - l_k||^2.
double objective(const Matrix& w, const Matrix& u, const Matrix& x,
                 double lambda);

// Ridge regression onto one-hot codes of the true labels, i.e. the
// clustering objective with memberships frozen at the labels. Labels must
// cover 0..C_S-1 with no empty class.
SourceModel train_source_model(const Matrix& x, std::span<const int> labels,
                               double lambda);

struct SlmcOptions {
  double lambda = 1.0;
  int max_iter = 100;
  double tol = 1e-5;  // relative objective decrease
};

struct SlmcResult {
  Matrix w;
  Matrix u;
  std::vector<double> trace;  // objective after every iteration
  bool converged = false;
};

// Alternates solve_w and update_membership from `init_u` until the relative
// objective decrease drops below tol or max_iter is reached.
SlmcResult slmc_fit(const Matrix& x, Eigen::Index clusters,
                    const Matrix& init_u, const SlmcOptions& options = {});

// Argmax over each column, ties going to the lowest cluster index.
std::vector<int> hard_assign(const Matrix& u);

// C x n memberships, each column an independent Dirichlet(1) draw.
Matrix dirichlet_memberships(Eigen::Index clusters, Eigen::Index samples,
                             std::uint64_t seed);

// Memberships seeded by k-means++ followed by a few Lloyd steps. Columns are
// the inverse-squared-distance weights to the resulting centers.
Matrix kmeans_memberships(const Matrix& x, Eigen::Index clusters,
                          std::uint64_t seed);

// Throws DataError unless u is C x n, entries lie in [0, 1] and every column
// sums to 1 within 1e-9.
void require_membership(const Matrix& u, Eigen::Index clusters,
                        Eigen::Index samples);

}  // namespace pa1smt::slmc
