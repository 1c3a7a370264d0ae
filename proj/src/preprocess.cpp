#include "pa1smt/preprocess.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/kernels.hpp"

#include <cmath>
#include <string>

namespace pa1smt::preprocess {
namespace {

using Index = Eigen::Index;

// Eigenvalues at or below this fraction of the largest one count as zero.
constexpr double kPositiveEigRatio = 1e-12;

Matrix double_center(const Matrix& k, const Vector& row_means,
                     double total_mean) {
  Matrix out = k;
  out.colwise() -= row_means;
  out.rowwise() -= row_means.transpose();
  out.array() += total_mean;
  return out;
}

}  // namespace

ZScore zscore(const Matrix& x) {
  const Index n = x.cols();
  if (n < 2) throw DataError("zscore needs at least 2 samples");
  ZScore out;
  out.means = x.rowwise().mean();
  out.data = x.colwise() - out.means;
  out.stds = (out.data.array().square().rowwise().sum() /
              static_cast<double>(n))
                 .sqrt();
  for (Index r = 0; r < x.rows(); ++r) {
    if (out.stds(r) > 0.0) {
      out.data.row(r) /= out.stds(r);
    } else {
      out.stds(r) = 0.0;
      out.data.row(r).setZero();
    }
  }
  return out;
}

double mean_pairwise_bandwidth(const Matrix& x) {
  const Index n = x.cols();
  if (n < 2) throw DataError("bandwidth needs at least 2 samples");
  const Matrix d2 = kernels::parallel::pairwise_sq_dists(x);
  double total = 0.0;
  for (Index j = 1; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      total += std::sqrt(d2(i, j));
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double mean = total / pairs;
  if (!(mean > 0.0)) {
    throw DataError("all samples are identical; bandwidth would be zero");
  }
  return mean;
}

Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double bandwidth) {
  return kernels::parallel::gaussian_kernel(x, y, bandwidth);
}

KpcaModel kpca_fit(const Matrix& x, const Retention& keep) {
  return kpca_fit(x, mean_pairwise_bandwidth(x), keep);
}

KpcaModel kpca_fit(const Matrix& x, double bandwidth, const Retention& keep) {
  const Index n = x.cols();
  if (n < 2) throw DataError("kpca needs at least 2 samples");
  linalg::require_finite(x, "kpca training data");

  KpcaModel model;
  model.training_data = x;
  model.bandwidth = bandwidth;
  const Matrix k = gaussian_kernel(x, x, bandwidth);
  model.row_means = k.rowwise().mean();
  model.total_mean = model.row_means.mean();
  const Matrix centered = double_center(k, model.row_means, model.total_mean);

  const linalg::SymEig eig = linalg::sym_eig(centered);
  const double top = eig.values(n - 1);
  Index positive = 0;
  double positive_mass = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    if (!(top > 0.0) || eig.values(i) <= kPositiveEigRatio * top) break;
    ++positive;
    positive_mass += eig.values(i);
  }
  if (positive == 0) {
    throw DataError("centered kernel has no positive eigenvalues");
  }

  Index retained = 0;
  if (const auto* count = std::get_if<ComponentCount>(&keep)) {
    if (count->k < 1) throw ConfigError("kpca component count must be >= 1");
    if (count->k > positive) {
      throw ConfigError("requested " + std::to_string(count->k) +
                        " kpca components but only " +
                        std::to_string(positive) + " eigenvalues are positive");
    }
    retained = count->k;
  } else {
    const double fraction = std::get<EnergyFraction>(keep).fraction;
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw ConfigError("kpca energy fraction must lie in (0, 1]");
    }
    double mass = 0.0;
    while (retained < positive) {
      mass += eig.values(n - 1 - retained);
      ++retained;
      if (mass >= fraction * positive_mass) break;
    }
  }

  model.eigvals.resize(retained);
  model.eigvecs.resize(n, retained);
  for (Index c = 0; c < retained; ++c) {
    model.eigvals(c) = eig.values(n - 1 - c);
    model.eigvecs.col(c) = eig.vectors.col(n - 1 - c);
  }
  return model;
}

Matrix kpca_transform(const KpcaModel& model, const Matrix& y) {
  if (y.rows() != model.training_data.rows()) {
    throw DimensionError("kpca_transform: data has " + std::to_string(y.rows()) +
                         " features, model expects " +
                         std::to_string(model.training_data.rows()));
  }
  Matrix cross = gaussian_kernel(model.training_data, y, model.bandwidth);
  const Vector col_means = cross.colwise().mean().transpose();
  cross.colwise() -= model.row_means;
  cross.rowwise() -= col_means.transpose();
  cross.array() += model.total_mean;
  Matrix scores = model.eigvecs.transpose() * cross;
  scores.array().colwise() /= model.eigvals.array().sqrt();
  return scores;
}

}  // namespace pa1smt::preprocess
