#include "pa1smt/synth.hpp"

#include "pa1smt/error.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>

namespace pa1smt::synth {
namespace {

using Index = Eigen::Index;

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) g(r, c) = normal(rng);
  }
  return g;
}

Matrix random_orthogonal(Index dim, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(dim, dim, rng));
  Matrix q = qr.householderQ();
  // Sign fix makes the draw Haar distributed.
  const Vector diag = qr.matrixQR().diagonal();
  for (Index c = 0; c < dim; ++c) {
    if (diag(c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

Matrix category_means(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const double gap = spec.separation * spec.class_std;
  const Index d = spec.dim;
  const Index c = spec.source_categories;
  if (d >= c) {
    // Scaled orthonormal directions: every pair sits exactly `gap` apart.
    const Matrix basis = random_orthogonal(d, rng);
    return gap / std::sqrt(2.0) * basis.leftCols(c);
  }
  // Fewer dimensions than categories: rejection-sample in a cube.
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const double half_side = gap * std::pow(static_cast<double>(c), 1.0 / d);
  Matrix means(d, c);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (Index k = 0; k < c; ++k) {
      for (Index r = 0; r < d; ++r) means(r, k) = half_side * uniform(rng);
    }
    bool ok = true;
    for (Index a = 0; a < c && ok; ++a) {
      for (Index b = a + 1; b < c && ok; ++b) {
        ok = (means.col(a) - means.col(b)).norm() >= gap;
      }
    }
    if (ok) return means;
  }
  throw ConfigError("could not place separated category means; raise dim");
}

Matrix rotation(const DomainShift& shift, Index dim, std::mt19937_64& rng) {
  if (shift.rotation == RotationKind::kRandomOrthogonal) {
    return random_orthogonal(dim, rng);
  }
  if (shift.angle == 0.0) return Matrix::Identity(dim, dim);
  const Matrix basis = random_orthogonal(dim, rng);
  Matrix givens = Matrix::Identity(dim, dim);
  const double c = std::cos(shift.angle);
  const double s = std::sin(shift.angle);
  for (Index p = 0; p + 1 < dim; p += 2) {
    givens(p, p) = c;
    givens(p, p + 1) = -s;
    givens(p + 1, p) = s;
    givens(p + 1, p + 1) = c;
  }
  return basis * givens * basis.transpose();
}

}  // namespace

void SyntheticSpec::validate() const {
  if (dim < 1 || source_categories < 2) {
    throw ConfigError("synthetic spec needs dim >= 1 and >= 2 source categories");
  }
  if (!(class_std >= 0.0) || !(separation >= 6.0)) {
    throw ConfigError("category separation must be at least 6 class stds");
  }
  if (source_samples_per_category < 1 || target_samples_per_category < 1) {
    throw ConfigError("samples per category must be >= 1");
  }
  if (targets.empty()) throw ConfigError("synthetic spec has no targets");
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto& cats = targets[j].categories;
    if (cats.empty()) {
      throw ConfigError("target " + std::to_string(j) + " has no categories");
    }
    std::set<int> seen;
    for (const int c : cats) {
      if (c < 0 || c >= source_categories || !seen.insert(c).second) {
        throw ConfigError("target " + std::to_string(j) +
                          " category subset is not a set of source categories");
      }
    }
    const DomainShift& s = targets[j].shift;
    if (!(s.noise >= 0.0) || !(s.translation >= 0.0) || !std::isfinite(s.angle)) {
      throw ConfigError("target " + std::to_string(j) + " has an invalid shift");
    }
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index d = spec.dim;
  std::seed_seq source_seq{spec.seed, std::uint64_t{0}};
  std::mt19937_64 rng(source_seq);

  SyntheticData out;
  out.means = category_means(spec, rng);

  const Index per = spec.source_samples_per_category;
  const Index n_s = per * spec.source_categories;
  out.source.x.resize(d, n_s);
  std::vector<int> source_labels(n_s);
  Matrix noise = gaussian(d, n_s, rng);
  for (Index k = 0, i = 0; k < spec.source_categories; ++k) {
    for (Index s = 0; s < per; ++s, ++i) {
      out.source.x.col(i) = out.means.col(k) + spec.class_std * noise.col(i);
      source_labels[i] = static_cast<int>(k);
    }
  }
  out.source.labels = std::move(source_labels);

  for (std::size_t j = 0; j < spec.targets.size(); ++j) {
    const TargetSpec& t = spec.targets[j];
    std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(j + 1)};
    std::mt19937_64 trng(seq);
    const Matrix rot = rotation(t.shift, d, trng);
    Vector offset = Vector::Zero(d);
    if (t.shift.translation > 0.0) {
      offset = gaussian(d, 1, trng).col(0);
      offset *= t.shift.translation / offset.norm();
    }
    const Index m = spec.target_samples_per_category *
                    static_cast<Index>(t.categories.size());
    const Matrix draw = gaussian(d, m, trng);
    const Matrix extra = gaussian(d, m, trng);
    Matrix x(d, m);
    std::vector<int> truth(m);
    Index i = 0;
    for (const int c : t.categories) {
      for (Index s = 0; s < spec.target_samples_per_category; ++s, ++i) {
        const Vector clean = out.means.col(c) + spec.class_std * draw.col(i);
        x.col(i) = rot * clean + offset;
        if (t.shift.noise > 0.0) x.col(i) += t.shift.noise * extra.col(i);
        truth[i] = c;
      }
    }
    out.targets.push_back(std::move(x));
    out.target_truth.push_back(std::move(truth));
  }
  return out;
}

SyntheticSpec default_transfer_spec(int targets) {
  if (targets < 1 || targets > 3) {
    throw ConfigError("default transfer spec supports 1 to 3 targets");
  }
  SyntheticSpec spec;
  spec.dim = 20;
  spec.separation = 8.0;
  const std::vector<std::vector<int>> subsets = {
      {0, 1, 2, 3, 4}, {0, 1, 2, 3, 5}, {1, 2, 3, 4}};
  for (int j = 0; j < targets; ++j) {
    TargetSpec t;
    t.categories = subsets[j];
    t.shift.angle = 0.25 + 0.1 * j;
    t.shift.translation = 1.0;
    t.shift.noise = 0.3;
    spec.targets.push_back(std::move(t));
  }
  return spec;
}

}  // namespace pa1smt::synth
