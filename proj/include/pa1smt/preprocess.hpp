#pragma once

#include "pa1smt/linalg.hpp"

#include <variant>

namespace pa1smt::preprocess {

struct ZScore {
  Matrix data;  // standardized, d x n
  Vector means;
  Vector stds;  // population convention; 0 for constant rows
};

// Standardizes each feature row to zero mean and unit population std.
// Constant rows are centered and left at zero. Requires n >= 2.
ZScore zscore(const Matrix& x);

// Mean Euclidean distance over all unordered pairs of distinct columns.
double mean_pairwise_bandwidth(const Matrix& x);

Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth);

struct ComponentCount {
  Eigen::Index k;
};
struct EnergyFraction {
  double fraction;  // in (0, 1]
};
using Retention = std::variant<ComponentCount, EnergyFraction>;

inline constexpr double kDefaultEnergy = 0.98;

struct KpcaModel {
  Matrix training_data;  // d x n
  double bandwidth = 1.0;
  Matrix eigvecs;   // n x k
  Vector eigvals;   // k, strictly positive, descending
  Vector row_means;  // n, means of the training kernel rows
  double total_mean = 0.0;

  Eigen::Index components() const { return eigvals.size(); }
};

// Gaussian-kernel PCA. The training kernel is double-centered and
// eigendecomposed; the leading components with positive eigenvalue are kept,
// either a fixed count or the fewest that reach the energy fraction.
KpcaModel kpca_fit(const Matrix& x, double bandwidth, const Retention& keep);

// Convenience overload taking the bandwidth from mean_pairwise_bandwidth.
KpcaModel kpca_fit(const Matrix& x, const Retention& keep);

// Projects the columns of y (d x m) to k x m component scores. Each centered
// cross-kernel column is projected onto the eigenvectors and scaled by
// 1/sqrt(eigval), so the training embedding has Gram matrix equal to the
// rank-k truncation of the centered training kernel.
Matrix kpca_transform(const KpcaModel& model, const Matrix& y);

}  // namespace pa1smt::preprocess
