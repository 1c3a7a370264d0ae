#include "pa1smt/slmc.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/kernels.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace pa1smt::slmc {
namespace {

using Index = Eigen::Index;

void check_conform(const Matrix& w, const Matrix& x) {
  if (w.rows() != x.rows()) {
    throw DimensionError("model has " + std::to_string(w.rows()) +
                         " features, data has " + std::to_string(x.rows()));
  }
}

void check_memberships(const Matrix& x, const Matrix& u) {
  if (u.cols() != x.cols()) {
    throw DimensionError("memberships cover " + std::to_string(u.cols()) +
                         " samples, data has " + std::to_string(x.cols()));
  }
}

}  // namespace

Matrix update_membership(const Matrix& w, const Matrix& x) {
  check_conform(w, x);
  const Matrix outputs = w.transpose() * x;
  return kernels::parallel::memberships(outputs, kExactHitTol);
}

Matrix weighted_scatter(const Matrix& x, const Matrix& u) {
  check_memberships(x, u);
  const Vector weights = u.array().square().colwise().sum().transpose();
  return x * weights.asDiagonal() * x.transpose();
}

Matrix membership_targets(const Matrix& x, const Matrix& u) {
  check_memberships(x, u);
  return x * u.array().square().matrix().transpose();
}

Matrix solve_w(const Matrix& x, const Matrix& u, double lambda) {
  Matrix a = lambda * weighted_scatter(x, u);
  a.diagonal().array() += 1.0;
  return linalg::solve_spd(a, lambda * membership_targets(x, u));
}

double objective(const Matrix& w, const Matrix& u, const Matrix& x,
                 double lambda) {
  check_conform(w, x);
  check_memberships(x, u);
  const Matrix dists = kernels::parallel::code_sq_dists(w.transpose() * x);
  const double fit = (u.array().square() * dists.array()).sum();
  return 0.5 * w.squaredNorm() + 0.5 * lambda * fit;
}

SourceModel train_source_model(const Matrix& x, std::span<const int> labels,
                               double lambda) {
  const Index n = x.cols();
  if (n == 0) throw DataError("source domain has no samples");
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("source labels: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " samples");
  }
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  linalg::require_finite(x, "source data");

  int top = -1;
  for (const int y : labels) {
    if (y < 0) throw DataError("source labels must be non-negative");
    top = std::max(top, y);
  }
  const Index classes = top + 1;
  std::vector<Index> counts(classes, 0);
  for (const int y : labels) ++counts[y];
  for (Index k = 0; k < classes; ++k) {
    if (counts[k] == 0) {
      throw DataError("source class " + std::to_string(k) + " has no samples");
    }
  }

  Matrix codes = Matrix::Zero(classes, n);
  for (Index i = 0; i < n; ++i) codes(labels[i], i) = 1.0;

  Matrix a = lambda * (x * x.transpose());
  a.diagonal().array() += 1.0;
  SourceModel model;
  model.w = linalg::solve_spd(a, lambda * (x * codes.transpose()));
  model.categories = classes;
  model.label_map.resize(classes);
  for (Index k = 0; k < classes; ++k) model.label_map[k] = static_cast<int>(k);
  return model;
}

SlmcResult slmc_fit(const Matrix& x, Index clusters, const Matrix& init_u,
                    const SlmcOptions& options) {
  if (clusters < 2) throw ConfigError("slmc needs at least 2 clusters");
  if (x.cols() < clusters) {
    throw DataError("slmc needs at least as many samples as clusters");
  }
  if (!(options.lambda > 0.0) || options.max_iter < 1 || !(options.tol > 0.0)) {
    throw ConfigError("invalid slmc options");
  }
  linalg::require_finite(x, "slmc data");
  require_membership(init_u, clusters, x.cols());

  SlmcResult result;
  result.u = init_u;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    result.w = solve_w(x, result.u, options.lambda);
    result.u = update_membership(result.w, x);
    const double value = objective(result.w, result.u, x, options.lambda);
    result.trace.push_back(value);
    if (std::isfinite(previous) &&
        previous - value < options.tol * std::max(std::abs(previous), 1e-300)) {
      result.converged = true;
      break;
    }
    previous = value;
  }
  return result;
}

std::vector<int> hard_assign(const Matrix& u) {
  std::vector<int> labels(u.cols());
  for (Index i = 0; i < u.cols(); ++i) {
    Index best = 0;
    for (Index k = 1; k < u.rows(); ++k) {
      if (u(k, i) > u(best, i)) best = k;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

Matrix dirichlet_memberships(Index clusters, Index samples,
                             std::uint64_t seed) {
  if (clusters < 1 || samples < 1) {
    throw ConfigError("membership shape must be positive");
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> draw(1.0);
  Matrix u(clusters, samples);
  for (Index i = 0; i < samples; ++i) {
    double total = 0.0;
    for (Index k = 0; k < clusters; ++k) {
      u(k, i) = draw(rng);
      total += u(k, i);
    }
    u.col(i) /= total;
  }
  return u;
}

Matrix kmeans_memberships(const Matrix& x, Index clusters, std::uint64_t seed) {
  const Index n = x.cols();
  if (clusters < 1 || n < clusters) {
    throw ConfigError("k-means seeding needs n >= clusters >= 1");
  }
  std::mt19937_64 rng(seed);
  Matrix centers(x.rows(), clusters);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.col(0) = x.col(first(rng));
  Vector nearest = (x.colwise() - centers.col(0)).colwise().squaredNorm();
  for (Index c = 1; c < clusters; ++c) {
    if (!(nearest.sum() > 0.0)) {
      centers.col(c) = x.col(first(rng));
      continue;
    }
    std::discrete_distribution<Index> pick(nearest.data(),
                                           nearest.data() + nearest.size());
    centers.col(c) = x.col(pick(rng));
    nearest = nearest.cwiseMin(
        (x.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }

  constexpr int kLloydSteps = 10;
  for (int step = 0; step < kLloydSteps; ++step) {
    const Matrix d2 = kernels::parallel::cross_sq_dists(centers, x);
    Matrix sums = Matrix::Zero(x.rows(), clusters);
    Vector counts = Vector::Zero(clusters);
    for (Index i = 0; i < n; ++i) {
      Index best;
      d2.col(i).minCoeff(&best);
      sums.col(best) += x.col(i);
      counts(best) += 1.0;
    }
    for (Index c = 0; c < clusters; ++c) {
      if (counts(c) > 0.0) centers.col(c) = sums.col(c) / counts(c);
    }
  }

  const Matrix d2 = kernels::parallel::cross_sq_dists(centers, x);
  Matrix u(clusters, n);
  for (Index i = 0; i < n; ++i) {
    Index best;
    if (d2.col(i).minCoeff(&best) <= kExactHitTol * kExactHitTol) {
      u.col(i).setZero();
      u(best, i) = 1.0;
      continue;
    }
    u.col(i) = d2.col(i).cwiseInverse();
    u.col(i) /= u.col(i).sum();
  }
  return u;
}

void require_membership(const Matrix& u, Index clusters, Index samples) {
  linalg::require_shape(u, clusters, samples, "membership matrix");
  if (!u.allFinite() || u.minCoeff() < 0.0 || u.maxCoeff() > 1.0) {
    throw DataError("membership entries must lie in [0, 1]");
  }
  for (Index i = 0; i < samples; ++i) {
    if (std::abs(u.col(i).sum() - 1.0) > 1e-9) {
      throw DataError("membership column " + std::to_string(i) +
                      " does not sum to 1");
    }
  }
}

}  // namespace pa1smt::slmc
