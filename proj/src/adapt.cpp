#include "pa1smt/adapt.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/kernels.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>

namespace pa1smt::adapt {
namespace {

using Index = Eigen::Index;

// Runs body(j) for every target, possibly on several threads, and rethrows
// the first failure (by target index) afterwards.
template <typename Body>
void for_each_target(Index count, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (Index j = 0; j < count; ++j) {
    try {
      body(j);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// min_V 1/2 tr(V^T A V) - tr(V^T R) + eta ||V||_{2,1} by reweighting.
CodingResult reweighted_coding(const Matrix& gram, const Matrix& rhs,
                               double eta, const Hyperparams& h,
                               const std::optional<Vector>& weights) {
  const Index rows = gram.rows();
  CodingResult out;
  out.row_weights = weights ? *weights : Vector::Ones(rows);
  if (out.row_weights.size() != rows) {
    throw DimensionError("row weights have length " +
                         std::to_string(out.row_weights.size()) + ", expected " +
                         std::to_string(rows));
  }
  out.coeffs = Matrix::Zero(rows, rhs.cols());
  if (rhs.isZero(0.0) && gram.isZero(0.0)) return out;

  for (int it = 0; it < h.max_inner; ++it) {
    Matrix system = gram;
    system.diagonal() += 2.0 * eta * out.row_weights;
    Matrix next = linalg::solve_spd(system, rhs);
    const double change = (next - out.coeffs).norm();
    const double scale = out.coeffs.norm();
    out.coeffs = std::move(next);
    out.row_weights =
        (2.0 * out.coeffs.rowwise().norm().array().max(h.row_floor)).inverse();
    out.iterations = it + 1;
    if (eta == 0.0) break;
    if (it > 0 && change <= h.tol_inner * scale) break;
  }
  return out;
}

void check_target(const TargetDomain& t, Index dim, Index source_categories,
                  std::size_t index) {
  const std::string name = "target " + std::to_string(index);
  if (t.x.rows() != dim) {
    throw DimensionError(name + " has " + std::to_string(t.x.rows()) +
                         " features, source model has " + std::to_string(dim));
  }
  if (t.categories < 2) {
    throw ConfigError(name + " needs at least 2 categories");
  }
  if (t.categories > source_categories) {
    throw ConfigError(name + " has more categories than the source");
  }
  if (t.x.cols() < t.categories) {
    throw DataError(name + " has fewer samples than categories");
  }
  linalg::require_finite(t.x, name);
  if (t.initial_u) {
    slmc::require_membership(*t.initial_u, t.categories, t.x.cols());
  }
}

bool stalled(double previous, double value, double tol) {
  return std::isfinite(previous) &&
         previous - value < tol * std::max(std::abs(previous), 1e-300);
}

}  // namespace

void Hyperparams::validate() const {
  const auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(lambda) || !nonneg(beta) || !nonneg(gamma) || !nonneg(eta)) {
    throw ConfigError("lambda, beta, gamma and eta must be finite and >= 0");
  }
  if (atoms < 1) throw ConfigError("dictionary atom count must be >= 1");
  if (max_outer < 1 || max_inner < 1) {
    throw ConfigError("iteration caps must be >= 1");
  }
  if (!(tol_outer > 0.0) || !(tol_inner > 0.0) || !(row_floor > 0.0)) {
    throw ConfigError("tolerances and the row-norm floor must be positive");
  }
}

double objective(const Matrix& w_s, std::span<const TargetState> states,
                 const Matrix& dictionary, std::span<const Matrix> data,
                 const Hyperparams& h) {
  if (states.size() != data.size()) {
    throw DimensionError("objective: " + std::to_string(states.size()) +
                         " states for " + std::to_string(data.size()) +
                         " datasets");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < states.size(); ++j) {
    const TargetState& s = states[j];
    const Matrix& x = data[j];
    if (x.rows() != w_s.rows() || s.w.rows() != w_s.rows() ||
        s.u.cols() != x.cols() || s.u.rows() != s.w.cols() ||
        s.v.rows() != s.w.cols() || s.v.cols() != w_s.cols() ||
        s.v_t.cols() != s.w.cols() || s.v_t.rows() != dictionary.cols() ||
        dictionary.rows() != w_s.rows()) {
      throw DimensionError("objective: target " + std::to_string(j) +
                           " does not conform");
    }
    const Matrix dists = kernels::parallel::code_sq_dists(s.w.transpose() * x);
    const double cluster = (s.u.array().square() * dists.array()).sum();
    total += 0.5 * s.w.squaredNorm() + 0.5 * h.lambda * cluster +
             0.5 * h.beta * (w_s - s.w * s.v).squaredNorm() +
             0.5 * h.gamma * (s.w - dictionary * s.v_t).squaredNorm() +
             h.eta * (linalg::l21_norm(s.v) + linalg::l21_norm(s.v_t));
  }
  return total;
}

Matrix update_w_t(const TargetState& state, const Matrix& dictionary,
                  const Matrix& w_s, const Matrix& x, const Hyperparams& h) {
  const Index dim = x.rows();
  Matrix a = h.lambda * slmc::weighted_scatter(x, state.u);
  a.diagonal().array() += 1.0 + h.gamma;
  const Matrix b = h.beta * (state.v * state.v.transpose());
  Matrix q = h.lambda * slmc::membership_targets(x, state.u);
  if (h.beta != 0.0) q += h.beta * (w_s * state.v.transpose());
  if (h.gamma != 0.0) q += h.gamma * (dictionary * state.v_t);
  linalg::require_shape(q, dim, state.u.rows(), "W_T right-hand side");
  return linalg::solve_sylvester(a, b, q);
}

Matrix update_d(std::span<const TargetState> states, const Matrix& previous) {
  if (states.empty()) throw ConfigError("update_d needs at least one target");
  const Index atoms = states.front().v_t.rows();
  const Index dim = states.front().w.rows();
  Matrix gram = Matrix::Zero(atoms, atoms);
  Matrix cross = Matrix::Zero(dim, atoms);
  for (const TargetState& s : states) {
    if (s.v_t.rows() != atoms || s.w.rows() != dim ||
        s.v_t.cols() != s.w.cols()) {
      throw DimensionError("update_d: target states do not conform");
    }
    gram.noalias() += s.v_t * s.v_t.transpose();
    cross.noalias() += s.w * s.v_t.transpose();
  }
  if (gram.trace() == 0.0) return previous;
  return linalg::solve_spd(gram, cross.transpose()).transpose();
}

CodingResult update_v(const Matrix& w_s, const Matrix& w_t,
                      const Hyperparams& h,
                      const std::optional<Vector>& weights) {
  if (w_s.rows() != w_t.rows()) {
    throw DimensionError("update_v: W_S and W_T differ in feature dimension");
  }
  if (h.beta == 0.0) {
    return {Matrix::Zero(w_t.cols(), w_s.cols()),
            weights ? *weights : Vector::Ones(w_t.cols()), 0};
  }
  const Matrix gram = h.beta * (w_t.transpose() * w_t);
  const Matrix rhs = h.beta * (w_t.transpose() * w_s);
  return reweighted_coding(gram, rhs, h.eta, h, weights);
}

CodingResult update_v_t(const Matrix& dictionary, const Matrix& w_t,
                        const Hyperparams& h,
                        const std::optional<Vector>& weights) {
  if (dictionary.rows() != w_t.rows()) {
    throw DimensionError("update_v_t: D and W_T differ in feature dimension");
  }
  if (h.gamma == 0.0) {
    return {Matrix::Zero(dictionary.cols(), w_t.cols()),
            weights ? *weights : Vector::Ones(dictionary.cols()), 0};
  }
  const Matrix gram = h.gamma * (dictionary.transpose() * dictionary);
  const Matrix rhs = h.gamma * (dictionary.transpose() * w_t);
  return reweighted_coding(gram, rhs, h.eta, h, weights);
}

double smoothed_l21(const Matrix& m, double floor) {
  double total = 0.0;
  for (Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).norm();
    total += s >= floor ? s : s * s / (2.0 * floor) + 0.5 * floor;
  }
  return total;
}

Matrix initial_dictionary(Index dim, Index atoms, std::uint64_t seed) {
  if (dim < 1 || atoms < 1) throw ConfigError("dictionary shape must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, atoms);
  for (Index c = 0; c < atoms; ++c) {
    for (Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
  }
  if (atoms <= dim) {
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(dim, atoms);
  }
  g.colwise().normalize();
  return g;
}

Matrix initial_memberships(const TargetDomain& target, MembershipInit init) {
  if (target.initial_u) return *target.initial_u;
  if (init == MembershipInit::kKMeans) {
    return slmc::kmeans_memberships(target.x, target.categories, target.seed);
  }
  return slmc::dirichlet_memberships(target.categories, target.x.cols(),
                                     target.seed);
}

std::vector<TargetState> initialize(const slmc::SourceModel& source,
                                    std::span<const TargetDomain> targets,
                                    const Matrix& dictionary,
                                    const Hyperparams& h,
                                    MembershipInit init) {
  std::vector<TargetState> states(targets.size());
  for_each_target(static_cast<Index>(targets.size()), [&](Index j) {
    const TargetDomain& t = targets[j];
    TargetState& s = states[j];
    s.u = initial_memberships(t, init);
    s.w = slmc::solve_w(t.x, s.u, h.lambda);
    s.v = linalg::solve_spd(s.w.transpose() * s.w, s.w.transpose() * source.w);
    s.v_t = linalg::solve_spd(dictionary.transpose() * dictionary,
                              dictionary.transpose() * s.w);
    s.v_weights = Vector::Ones(t.categories);
    s.v_t_weights = Vector::Ones(h.atoms);
  });
  return states;
}

FitReport fit(const slmc::SourceModel& source,
              std::span<const TargetDomain> targets, const Hyperparams& h,
              MembershipInit init) {
  h.validate();
  if (targets.empty()) throw ConfigError("fit needs at least one target domain");
  linalg::require_finite(source.w, "source model");
  const Index dim = source.w.rows();
  for (std::size_t j = 0; j < targets.size(); ++j) {
    check_target(targets[j], dim, source.w.cols(), j);
  }

  const Index count = static_cast<Index>(targets.size());
  std::vector<Matrix> data;
  data.reserve(targets.size());
  for (const TargetDomain& t : targets) data.push_back(t.x);

  FitReport report;
  report.dictionary = initial_dictionary(dim, h.atoms, h.seed);
  report.targets = initialize(source, targets, report.dictionary, h, init);
  auto& states = report.targets;

  double previous = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < h.max_outer; ++outer) {
    for_each_target(count, [&](Index j) {
      states[j].w = update_w_t(states[j], report.dictionary, source.w,
                               data[j], h);
      states[j].u = slmc::update_membership(states[j].w, data[j]);
      CodingResult v = update_v(source.w, states[j].w, h, states[j].v_weights);
      CodingResult v_t = update_v_t(report.dictionary, states[j].w, h,
                                    states[j].v_t_weights);
      states[j].v = std::move(v.coeffs);
      states[j].v_weights = std::move(v.row_weights);
      states[j].v_t = std::move(v_t.coeffs);
      states[j].v_t_weights = std::move(v_t.row_weights);
    });
    report.dictionary = update_d(states, report.dictionary);

    for (const TargetState& s : states) {
      if (!s.w.allFinite() || !s.v.allFinite() || !s.v_t.allFinite()) {
        throw SolverError("non-finite target state after outer iteration " +
                          std::to_string(outer + 1));
      }
    }
    if (!report.dictionary.allFinite()) {
      throw SolverError("non-finite dictionary after outer iteration " +
                        std::to_string(outer + 1));
    }

    const double value =
        objective(source.w, states, report.dictionary, data, h);
    report.trace.push_back(value);
    report.iterations = outer + 1;
    if (stalled(previous, value, h.tol_outer)) {
      report.converged = true;
      break;
    }
    previous = value;
  }

  report.assignments.reserve(states.size());
  for (const TargetState& s : states) {
    report.assignments.push_back(slmc::hard_assign(s.u));
  }
  return report;
}

}  // namespace pa1smt::adapt
