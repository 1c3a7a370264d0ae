#pragma once

#include "pa1smt/linalg.hpp"
#include "pa1smt/slmc.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

// Joint adaptation from one labeled source domain to several unlabeled target
// domains through model-parameter dictionaries.
//
// Every target j carries an SLMC model W_T^j (d x C_T^j) and memberships U^j.
// The source model W_S (d x C_S) is reconstructed from each W_T^j through
// coefficients V^j (C_T^j x C_S), and all W_T^j are in turn reconstructed
// from a shared dictionary D (d x r) through codes V_T^j (r x C_T^j). Both
// coefficient families carry a row-sparsity (L2,1) penalty. The joint
// objective is minimized by block coordinate descent; each block update is a
// closed form or a reweighted least-squares loop, so the objective never
// increases.
//
// Only the source model crosses into this module. fit() has no parameter
// through which source samples or target labels could be passed.
namespace pa1smt::adapt {

struct Hyperparams {
  double lambda = 1.0;  // clustering term
  double beta = 50.0;   // source-to-target reconstruction
  double gamma = 1.0;   // shared-dictionary reconstruction
  double eta = 0.1;     // L2,1 sparsity on V and V_T
  Eigen::Index atoms = 10;
  int max_outer = 100;
  int max_inner = 50;
  double tol_outer = 1e-5;  // relative objective decrease
  double tol_inner = 1e-6;  // relative change of V / V_T
  double row_floor = 1e-8;  // floor on row norms in the reweighting
  std::uint64_t seed = 0;   // dictionary initialization

  // Throws ConfigError on a negative weight, r < 1 or a non-positive
  // tolerance, floor or iteration cap.
  void validate() const;
};

enum class MembershipInit { kDirichlet, kKMeans };

// One unlabeled target domain. The seed is tied to the domain rather than to
// its position in the list, so reordering targets reorders the results.
struct TargetDomain {
  Matrix x;  // d x n_t
  Eigen::Index categories = 0;
  std::uint64_t seed = 0;
  std::optional<Matrix> initial_u;  // overrides the seeded initialization
};

struct TargetState {
  Matrix w;    // W_T, d x C_T
  Matrix u;    // C_T x n_t
  Matrix v;    // C_T x C_S
  Matrix v_t;  // r x C_T
  // Diagonals of the reweighting matrices for V and V_T, carried across
  // outer iterations.
  Vector v_weights;
  Vector v_t_weights;

  Eigen::Index categories() const { return w.cols(); }
};

struct FitReport {
  std::vector<TargetState> targets;
  Matrix dictionary;            // D, d x r
  std::vector<double> trace;    // objective after every outer iteration
  std::vector<std::vector<int>> assignments;
  int iterations = 0;
  bool converged = false;
};

struct CodingResult {
  Matrix coeffs;
  Vector row_weights;  // 1 / (2 max(||row||, floor)) at the returned coeffs
  int iterations = 0;
};

// The joint objective, summed over targets:
//   1/2 ||W_T||^2 + lambda/2 sum_k sum_i u_ki^2 ||W_T^T x_i - l_k||^2
//   + beta/2 ||W_S - W_T V||^2 + gamma/2 ||W_T - D V_T||^2
//   + eta (||V||_{2,1} + ||V_T||_{2,1})
double objective(const Matrix& w_s, std::span<const TargetState> states,
                 const Matrix& dictionary, std::span<const Matrix> data,
                 const Hyperparams& h);

// Exact minimizer over W_T with everything else fixed. Solves the Sylvester
// equation
//   ((1 + gamma) I + lambda X Uhat X^T) W + W (beta V V^T)
//       = lambda X (U .* U)^T + beta W_S V^T + gamma D V_T.
Matrix update_w_t(const TargetState& state, const Matrix& dictionary,
                  const Matrix& w_s, const Matrix& x, const Hyperparams& h);

// Least-squares dictionary D = (sum_j W_T V_T^T)(sum_j V_T V_T^T)^-1, summed
// in list order. When every V_T is zero any D is optimal and `previous` is
// returned unchanged.
Matrix update_d(std::span<const TargetState> states, const Matrix& previous);

// Reweighted least squares for
//   min_V beta/2 ||W_S - W_T V||^2 + eta ||V||_{2,1}.
// Starts from the given row weights (identity when absent) and alternates
// V = (beta W_T^T W_T + 2 eta M)^-1 beta W_T^T W_S with
// m_ii = 1 / (2 max(||v^i||, floor)).
CodingResult update_v(const Matrix& w_s, const Matrix& w_t,
                      const Hyperparams& h,
                      const std::optional<Vector>& weights = std::nullopt);

// Same loop for min_{V_T} gamma/2 ||W_T - D V_T||^2 + eta ||V_T||_{2,1}.
CodingResult update_v_t(const Matrix& dictionary, const Matrix& w_t,
                        const Hyperparams& h,
                        const std::optional<Vector>& weights = std::nullopt);

// L2,1 norm with each row norm s replaced by its floored (Huber) surrogate
// s^2/(2 floor) + floor/2 when s < floor. The reweighting loops decrease the
// penalized objective measured with this norm.
double smoothed_l21(const Matrix& m, double floor);

// Seeded d x r dictionary. Columns are orthonormal when r <= d, otherwise
// independent random unit vectors.
Matrix initial_dictionary(Eigen::Index dim, Eigen::Index atoms,
                          std::uint64_t seed);

// Starting memberships of one target: the supplied ones if present,
// otherwise seeded from the domain's own seed.
Matrix initial_memberships(const TargetDomain& target, MembershipInit init);

// Builds the starting states: seeded (or supplied) memberships, one
// clustering W-solve, least-squares V and V_T, identity reweighting.
std::vector<TargetState> initialize(const slmc::SourceModel& source,
                                    std::span<const TargetDomain> targets,
                                    const Matrix& dictionary,
                                    const Hyperparams& h,
                                    MembershipInit init);

FitReport fit(const slmc::SourceModel& source,
              std::span<const TargetDomain> targets, const Hyperparams& h,
              MembershipInit init = MembershipInit::kDirichlet);

}  // namespace pa1smt::adapt
