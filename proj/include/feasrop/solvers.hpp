#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "feasrop/sensing.hpp"
#include "feasrop/spectral.hpp"

namespace feasrop {

struct SolverConfig {
  int max_iters = 10000;
  /// Stop once ‖Z(X) − b‖₂ ≤ feas_tol.
  double feas_tol = 1e-5;
  /// Fixed stepsize for Nesterov and FGD; ignored by the dual and splitting methods.
  double stepsize = 0.1;
  int lbfgs_memory = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  /// Factor rank for FGD.
  std::optional<Index> rank;
  /// Also stop once ‖Z(X) − b‖₁ ≤ l1_budget (noisy feasibility).
  std::optional<double> l1_budget;

  /// Throws DomainError on an inconsistent configuration.
  void validate() const;
};

enum class Termination { Converged, IterLimit, NumericalFailure };
std::string_view to_string(Termination t);

struct SolverReport {
  int iterations = 0;
  /// ‖Z(X_k) − b‖₂ for k = 0..iterations.
  std::vector<double> residual_history;
  double final_l1_residual = 0.0;
  double wall_time = 0.0;
  Termination termination = Termination::IterLimit;
  int eig_decompositions = 0;
  std::string message;
};

struct SolveResult {
  SymMatrix x;
  SolverReport report;
};

// Dual-space projection ------------------------------------------------------

struct DualState {
  Eigen::VectorXd y;
  SymMatrix x_of_y;
  double theta = 0.0;
  /// Ascent gradient b − Z(X(y)).
  Eigen::VectorXd grad;
};

/// Dual function of min ½‖C − X‖²_F over {X ⪰ 0, Z(X) = b}, evaluated at y.
/// A positive `ridge` μ evaluates the dual of the relaxed problem
/// min ½‖C − X‖² + ‖Z(X) − b‖²/(2μ), i.e. θ(y) − μ‖y‖²/2 with gradient b − Z(X(y)) − μy.
DualState dual_theta(const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& y, double ridge = 0.0);

/// Projects `anchor` onto the feasible set by L-BFGS ascent on the dual.
///
/// With cfg.l1_budget set, the exact dual may be unbounded (noisy b outside the
/// image of the PSD cone), so the ascent runs on the ridge-relaxed dual with
/// μ = 1, 0.1, 0.01, … and stops at the first iterate whose ℓ₁ residual is
/// within budget.
SolveResult lbfgs_dual_project(const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                               const SolverConfig& cfg = {});

struct LinePoint {
  double value;
  double slope;
};

using LineFunction = std::function<LinePoint(double)>;

struct LineSearchResult {
  double step;
  LinePoint point;
  int evaluations;
  /// False when only the sufficient-increase condition holds (fallback).
  bool strong_wolfe;
};

/// Strong-Wolfe line search for an ascent direction: φ(t) ≥ φ(0) + c1·t·φ′(0) and
/// |φ′(t)| ≤ c2·φ′(0). Throws DomainError if φ′(0) ≤ 0, LineSearchError after 40
/// iterations with no acceptable step.
LineSearchResult wolfe_line_search(const LineFunction& phi, LinePoint at_zero, double step0, double c1 = 1e-4,
                                   double c2 = 0.9);

// Primal methods -------------------------------------------------------------

/// Accelerated projected gradient on ½‖Z(X) − b‖², starting from 0.
SolveResult nesterov_feasibility(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg = {});

/// Euclidean projection onto {X : Z(X) = b}. Factorizes the Gram matrix
/// Gᵢⱼ = (zᵢᵀzⱼ)² once; throws IllPosedProjectionError when cond(G) > 1e12.
///
/// For m > n(n+1)/2 the dyads cannot be independent, so the projector instead
/// solves in orthonormal symmetric coordinates with a rank-revealing
/// factorization (least squares if b is inconsistent).
class AffineProjector {
 public:
  AffineProjector(const SensingEnsemble& z, Eigen::VectorXd b);

  SymMatrix project(const SymMatrix& x) const;
  double gram_condition_estimate() const { return cond_; }
  bool overdetermined() const { return overdetermined_; }

 private:
  SensingEnsemble z_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
  bool overdetermined_ = false;
  double cond_ = 0.0;
};

SymMatrix affine_project(const SymMatrix& x, const SensingEnsemble& z, const Eigen::VectorXd& b);

/// Douglas-Rachford splitting between the affine set and the PSD cone.
SolveResult douglas_rachford(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg = {});

/// Factored gradient descent on U with X = U Uᵀ, rank r = cfg.rank.
SolveResult fgd(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg);

enum class SolverKind { Lbfgs, Nesterov, DouglasRachford, Fgd };
std::string_view to_string(SolverKind k);
/// Accepts "lbfgs", "nesterov", "dr", "fgd".
SolverKind parse_solver(std::string_view s);

/// Dispatch helper; the anchor is used by the dual method only.
SolveResult solve(SolverKind kind, const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                  const SolverConfig& cfg);

}  // namespace feasrop
