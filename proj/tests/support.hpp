#pragma once

// Shared helpers for the test and acceptance binaries: seeded random
// instances plus independent reference implementations. The references use
// scalar loops or dense formulations and deliberately avoid the library's
// own code paths.

#include "pa1smt/adapt.hpp"
#include "pa1smt/linalg.hpp"
#include "pa1smt/slmc.hpp"

#include <Eigen/LU>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace testing {

using pa1smt::Matrix;
using pa1smt::Vector;
using Index = Eigen::Index;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int integer(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  Matrix gaussian(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) m(r, c) = normal();
    }
    return m;
  }
  Matrix spd(Index n, double shift = 0.5) {
    const Matrix g = gaussian(n, n);
    Matrix a = g * g.transpose() / static_cast<double>(n);
    a.diagonal().array() += shift;
    return a;
  }
  // PSD with the given rank (rank < n gives a singular matrix).
  Matrix psd(Index n, Index rank) {
    const Matrix g = gaussian(n, rank);
    return g * g.transpose();
  }
  // Column-stochastic C x n matrix with strictly positive entries.
  Matrix simplex_columns(Index c, Index n) {
    Matrix u(c, n);
    std::exponential_distribution<double> e(1.0);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < c; ++k) u(k, i) = e(engine_) + 1e-3;
      u.col(i) /= u.col(i).sum();
    }
    return u;
  }
  std::vector<int> labels(std::size_t n, int classes) {
    std::vector<int> out(n);
    for (auto& v : out) v = integer(0, classes - 1);
    return out;
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Solves A X + X B = Q through the (dc x dc) system
// (I_c kron A + B^T kron I_d) vec(X) = vec(Q).
inline Matrix kron_sylvester(const Matrix& a, const Matrix& b, const Matrix& q) {
  const Index d = a.rows();
  const Index c = b.rows();
  Matrix big = Matrix::Zero(d * c, d * c);
  for (Index j = 0; j < c; ++j) {
    for (Index k = 0; k < c; ++k) {
      for (Index r = 0; r < d; ++r) {
        for (Index s = 0; s < d; ++s) {
          double v = (j == k ? a(r, s) : 0.0) + (r == s ? b(k, j) : 0.0);
          big(j * d + r, k * d + s) = v;
        }
      }
    }
  }
  Vector rhs(d * c);
  for (Index j = 0; j < c; ++j) {
    for (Index r = 0; r < d; ++r) rhs(j * d + r) = q(r, j);
  }
  const Vector x = big.fullPivLu().solve(rhs);
  Matrix out(d, c);
  for (Index j = 0; j < c; ++j) {
    for (Index r = 0; r < d; ++r) out(r, j) = x(j * d + r);
  }
  return out;
}

// ||W^T x_i - l_k||^2 with explicit loops.
inline double naive_code_dist(const Matrix& w, const Matrix& x, Index i,
                              Index k) {
  double total = 0.0;
  for (Index c = 0; c < w.cols(); ++c) {
    double f = 0.0;
    for (Index r = 0; r < w.rows(); ++r) f += w(r, c) * x(r, i);
    const double diff = f - (c == k ? 1.0 : 0.0);
    total += diff * diff;
  }
  return total;
}

inline double naive_frob2(const Matrix& m) {
  double t = 0.0;
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) t += m(r, c) * m(r, c);
  }
  return t;
}

inline double naive_l21(const Matrix& m) {
  double t = 0.0;
  for (Index r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (Index c = 0; c < m.cols(); ++c) s += m(r, c) * m(r, c);
    t += std::sqrt(s);
  }
  return t;
}

inline Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
    }
  }
  return out;
}

// Clustering value sum_k sum_i u_ki^2 ||W^T x_i - l_k||^2.
inline double naive_cluster_term(const Matrix& w, const Matrix& u,
                                 const Matrix& x) {
  double t = 0.0;
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index k = 0; k < u.rows(); ++k) {
      t += u(k, i) * u(k, i) * naive_code_dist(w, x, i, k);
    }
  }
  return t;
}

inline double naive_objective(const Matrix& w_s,
                              std::span<const pa1smt::adapt::TargetState> states,
                              const Matrix& d, std::span<const Matrix> data,
                              const pa1smt::adapt::Hyperparams& h) {
  double total = 0.0;
  for (std::size_t j = 0; j < states.size(); ++j) {
    const auto& s = states[j];
    total += 0.5 * naive_frob2(s.w);
    total += 0.5 * h.lambda * naive_cluster_term(s.w, s.u, data[j]);
    total += 0.5 * h.beta * naive_frob2(w_s - naive_product(s.w, s.v));
    total += 0.5 * h.gamma * naive_frob2(s.w - naive_product(d, s.v_t));
    total += h.eta * (naive_l21(s.v) + naive_l21(s.v_t));
  }
  return total;
}

// Central finite-difference gradient of f at m.
template <typename F>
Matrix fd_gradient(F&& f, const Matrix& m, double step = 1e-5) {
  Matrix g(m.rows(), m.cols());
  Matrix probe = m;
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      const double h = step * std::max(1.0, std::abs(m(r, c)));
      probe(r, c) = m(r, c) + h;
      const double up = f(probe);
      probe(r, c) = m(r, c) - h;
      const double down = f(probe);
      probe(r, c) = m(r, c);
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline double huber_l21(const Matrix& m, double floor) {
  double t = 0.0;
  for (Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).norm();
    t += s >= floor ? s : s * s / (2.0 * floor) + floor / 2.0;
  }
  return t;
}

// Accelerated proximal gradient (FISTA with restarts) for
//   min_V weight/2 ||T - B V||^2 + eta ||V||_{2,1}
// using the group soft-threshold prox. Independent of the reweighting loop.
inline Matrix group_lasso_fista(const Matrix& basis, const Matrix& target,
                                double weight, double eta, int iterations) {
  const Matrix gram = weight * basis.transpose() * basis;
  const Matrix rhs = weight * basis.transpose() * target;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double lipschitz = std::max(es.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lipschitz;
  const auto value = [&](const Matrix& v) {
    return 0.5 * weight * (target - basis * v).squaredNorm() +
           eta * naive_l21(v);
  };
  const auto prox = [&](const Matrix& z) {
    Matrix out = z;
    for (Index r = 0; r < z.rows(); ++r) {
      const double n = z.row(r).norm();
      const double keep = n > step * eta ? 1.0 - step * eta / n : 0.0;
      out.row(r) = keep * z.row(r);
    }
    return out;
  };
  Matrix x = Matrix::Zero(gram.rows(), target.cols());
  Matrix y = x;
  double t = 1.0;
  double fx = value(x);
  for (int it = 0; it < iterations; ++it) {
    const Matrix next = prox(y - step * (gram * y - rhs));
    const double fn = value(next);
    if (fn > fx) {  // adaptive restart
      y = x;
      t = 1.0;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    fx = fn;
    t = tn;
  }
  return x;
}

// A random adaptation problem: clustered source data with a trained model
// and `targets` unlabeled domains drawn from shifted copies of the clusters.
struct Problem {
  pa1smt::slmc::SourceModel source;
  std::vector<pa1smt::adapt::TargetDomain> targets;
};

inline Problem random_problem(Rng& rng, Index dim, Index source_categories,
                              int targets, Index max_samples) {
  const Matrix means = 4.0 * rng.gaussian(dim, source_categories);
  const auto draw = [&](Index n, Index classes, const Vector& shift,
                        std::vector<int>* labels) {
    Matrix x(dim, n);
    for (Index i = 0; i < n; ++i) {
      const int k = static_cast<int>(i % classes);
      x.col(i) = means.col(k) + shift + rng.gaussian(dim, 1);
      if (labels) labels->push_back(k);
    }
    return x;
  };
  Problem p;
  std::vector<int> labels;
  const Matrix xs = draw(std::max<Index>(source_categories * 5,
                                         rng.integer(20, static_cast<int>(max_samples))),
                         source_categories, Vector::Zero(dim), &labels);
  p.source = pa1smt::slmc::train_source_model(xs, labels, 1.0);
  for (int j = 0; j < targets; ++j) {
    pa1smt::adapt::TargetDomain t;
    t.categories = rng.integer(2, static_cast<int>(source_categories));
    const Index n = std::max<Index>(t.categories * 3,
                                    rng.integer(10, static_cast<int>(max_samples)));
    t.x = draw(n, t.categories, 0.5 * rng.gaussian(dim, 1), nullptr);
    t.seed = static_cast<std::uint64_t>(rng.integer(0, 1 << 30));
    p.targets.push_back(std::move(t));
  }
  return p;
}

// Random (not optimized) state of one target with r atoms.
inline pa1smt::adapt::TargetState random_state(Rng& rng, Index dim,
                                               Index source_categories,
                                               Index categories, Index atoms,
                                               Index samples) {
  pa1smt::adapt::TargetState s;
  s.w = rng.gaussian(dim, categories);
  s.u = rng.simplex_columns(categories, samples);
  s.v = rng.gaussian(categories, source_categories);
  s.v_t = rng.gaussian(atoms, categories);
  s.v_weights = Vector::Ones(categories);
  s.v_t_weights = Vector::Ones(atoms);
  return s;
}

// Temporary directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pa1smt_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
