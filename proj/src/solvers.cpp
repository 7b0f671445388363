#include "feasrop/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "feasrop/errors.hpp"

namespace feasrop {

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kLineSearchMaxIters = 40;
constexpr double kDivergenceFactor = 1e6;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_measurements(const SensingEnsemble& z, const Eigen::VectorXd& b, const char* what) {
  if (b.size() != z.m()) {
    std::ostringstream os;
    os << what << ": measurement vector has length " << b.size() << ", ensemble has m=" << z.m();
    throw DomainError(os.str());
  }
}

/// Tracks residuals and decides when a run is done.
class Monitor {
 public:
  Monitor(const SolverConfig& cfg, SolverReport& report) : cfg_(cfg), report_(report) {}

  /// Records the residual of the current iterate; returns true when feasible.
  bool record(const Eigen::VectorXd& residual) {
    const double r2 = residual.norm();
    report_.residual_history.push_back(r2);
    report_.final_l1_residual = residual.lpNorm<1>();
    if (report_.residual_history.size() == 1) initial_ = r2;
    if (r2 <= cfg_.feas_tol || (cfg_.l1_budget && report_.final_l1_residual <= *cfg_.l1_budget)) {
      report_.termination = Termination::Converged;
      return true;
    }
    return false;
  }

  /// True (and marks failure) on non-finite or runaway residuals.
  bool diverged() {
    const double r = report_.residual_history.back();
    if (!std::isfinite(r) || r > kDivergenceFactor * std::max(initial_, 1e-300)) {
      report_.termination = Termination::NumericalFailure;
      report_.message = "diverged: residual " + std::to_string(r);
      return true;
    }
    return false;
  }

 private:
  const SolverConfig& cfg_;
  SolverReport& report_;
  double initial_ = 0.0;
};

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 0) throw DomainError("SolverConfig: max_iters must be nonnegative");
  if (!(feas_tol > 0)) throw DomainError("SolverConfig: feas_tol must be positive");
  if (!(stepsize > 0)) throw DomainError("SolverConfig: stepsize must be positive");
  if (lbfgs_memory < 1) throw DomainError("SolverConfig: lbfgs_memory must be positive");
  if (!(0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1))
    throw DomainError("SolverConfig: need 0 < wolfe_c1 < wolfe_c2 < 1");
  if (rank && *rank < 1) throw DomainError("SolverConfig: rank must be positive");
  if (l1_budget && !(*l1_budget >= 0)) throw DomainError("SolverConfig: l1_budget must be nonnegative");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "converged";
    case Termination::IterLimit:
      return "iter-limit";
    case Termination::NumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Dual projection

DualState dual_theta(const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& y, double ridge) {
  require_measurements(z, b, "dual_theta");
  if (y.size() != z.m()) throw DomainError("dual_theta: dual vector length does not match m");
  if (anchor.dim() != z.n()) throw DomainError("dual_theta: anchor dimension does not match n");
  if (!(ridge >= 0)) throw DomainError("dual_theta: ridge must be nonnegative");
  SymMatrix x = psd_project(anchor + adjoint(z, y));
  double theta = y.dot(b) + 0.5 * (anchor.squared_norm() - x.squared_norm());
  Eigen::VectorXd grad = b - apply(z, x);
  if (ridge > 0) {
    theta -= 0.5 * ridge * y.squaredNorm();
    grad -= ridge * y;
  }
  return DualState{y, std::move(x), theta, std::move(grad)};
}

LineSearchResult wolfe_line_search(const LineFunction& phi, LinePoint at_zero, double step0, double c1, double c2) {
  if (!(at_zero.slope > 0)) throw DomainError("wolfe_line_search: direction is not an ascent direction");
  if (!(step0 > 0)) throw DomainError("wolfe_line_search: initial step must be positive");
  if (!(0 < c1 && c1 < c2 && c2 < 1)) throw DomainError("wolfe_line_search: need 0 < c1 < c2 < 1");

  const double f0 = at_zero.value;
  const double d0 = at_zero.slope;
  int evals = 0;
  auto sufficient = [&](double t, const LinePoint& p) { return p.value >= f0 + c1 * t * d0; };
  auto curvature = [&](const LinePoint& p) { return std::abs(p.slope) <= c2 * d0; };

  // Best step meeting sufficient increase, used if curvature never holds.
  std::optional<std::pair<double, LinePoint>> fallback;
  auto note = [&](double t, const LinePoint& p) {
    if (sufficient(t, p) && (!fallback || p.value > fallback->second.value)) fallback = {t, p};
  };

  // Bracketing phase.
  double lo = 0.0, hi = 0.0;
  LinePoint plo = at_zero, phi_hi = at_zero;
  bool bracketed = false;
  double t_prev = 0.0;
  LinePoint p_prev = at_zero;
  double t = step0;
  while (evals < kLineSearchMaxIters) {
    LinePoint p = phi(t);
    ++evals;
    if (!std::isfinite(p.value) || !std::isfinite(p.slope)) {
      // Treat as overshoot.
      lo = t_prev, plo = p_prev, hi = t, phi_hi = p;
      bracketed = true;
      break;
    }
    note(t, p);
    if (!sufficient(t, p) || (evals > 1 && p.value <= p_prev.value)) {
      lo = t_prev, plo = p_prev, hi = t, phi_hi = p;
      bracketed = true;
      break;
    }
    if (curvature(p)) return {t, p, evals, true};
    if (p.slope <= 0) {
      lo = t, plo = p, hi = t_prev, phi_hi = p_prev;
      bracketed = true;
      break;
    }
    t_prev = t;
    p_prev = p;
    t *= 2.0;
  }

  // Zoom phase: lo always satisfies sufficient increase and has the larger value.
  while (bracketed && evals < kLineSearchMaxIters) {
    const double a = std::min(lo, hi), w = std::abs(hi - lo);
    double trial;
    // Cubic interpolation when both endpoint values are usable; else bisection.
    if (std::isfinite(phi_hi.value) && std::isfinite(phi_hi.slope)) {
      const double d1 = plo.slope + phi_hi.slope - 3.0 * (plo.value - phi_hi.value) / (lo - hi);
      const double disc = d1 * d1 - plo.slope * phi_hi.slope;
      if (disc >= 0) {
        const double d2 = std::copysign(std::sqrt(disc), hi - lo);
        trial = hi - (hi - lo) * (phi_hi.slope + d2 - d1) / (phi_hi.slope - plo.slope + 2.0 * d2);
      } else {
        trial = 0.5 * (lo + hi);
      }
    } else {
      trial = 0.5 * (lo + hi);
    }
    if (!std::isfinite(trial) || trial < a + 0.1 * w || trial > a + 0.9 * w) trial = 0.5 * (lo + hi);

    LinePoint p = phi(trial);
    ++evals;
    if (!std::isfinite(p.value) || !std::isfinite(p.slope)) {
      hi = trial, phi_hi = p;
      continue;
    }
    note(trial, p);
    if (!sufficient(trial, p) || p.value <= plo.value) {
      hi = trial, phi_hi = p;
    } else {
      if (curvature(p)) return {trial, p, evals, true};
      if (p.slope * (hi - lo) <= 0) {
        hi = lo, phi_hi = plo;
      }
      lo = trial, plo = p;
    }
    if (w < 1e-16 * std::max(1.0, a)) break;
  }

  if (fallback) return {fallback->first, fallback->second, evals, false};
  throw LineSearchError("wolfe_line_search: no acceptable step after " + std::to_string(evals) + " evaluations");
}

namespace {

constexpr double kRidgeStart = 1.0;
constexpr double kRidgeShrink = 0.1;
constexpr double kRidgeFloor = 1e-12;

/// L-BFGS ascent on the (possibly ridge-relaxed) dual. Owns the iterate and the
/// report bookkeeping shared across continuation stages.
class DualAscent {
 public:
  enum class Stage { Feasible, StageDone, Failed, OutOfIterations };

  DualAscent(const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg,
             SolverReport& report)
      : anchor_(anchor), z_(z), b_(b), cfg_(cfg), report_(report), monitor_(cfg, report),
        state_(dual_theta(anchor, z, b, Eigen::VectorXd::Zero(z.m()))) {
    report_.eig_decompositions = 1;
    feasible_ = monitor_.record(residual());
  }

  bool feasible() const { return feasible_; }
  int iterations() const { return iterations_; }
  DualState& state() { return state_; }

  /// Ascends θ_μ until ‖∇θ_μ‖₂ ≤ stage_tol, the feasibility test passes, or the
  /// iteration limit is reached.
  Stage run(double ridge, bool exact) {
    if (ridge != ridge_) {
      ridge_ = ridge;
      state_ = dual_theta(anchor_, z_, b_, state_.y, ridge_);
      ++report_.eig_decompositions;
    }
    memory_.clear();
    while (true) {
      if (feasible_) return Stage::Feasible;
      if (!exact && state_.grad.norm() <= std::max(cfg_.feas_tol, 1e-2 * residual().norm())) return Stage::StageDone;
      if (iterations_ >= cfg_.max_iters) return Stage::OutOfIterations;
      if (!step()) return Stage::Failed;
      ++iterations_;
      feasible_ = monitor_.record(residual());
    }
  }

 private:
  Eigen::VectorXd residual() const { return apply(z_, state_.x_of_y) - b_; }

  bool step() {
    const Eigen::VectorXd& g = state_.grad;

    // Two-loop recursion on ψ = −θ; the ascent direction is H·g.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(memory_.size());
    for (std::size_t i = memory_.size(); i-- > 0;) {
      const auto& [s, yv] = memory_[i];
      alpha[i] = s.dot(q) / yv.dot(s);
      q -= alpha[i] * yv;
    }
    if (!memory_.empty()) {
      const auto& [s, yv] = memory_.back();
      q *= s.dot(yv) / yv.squaredNorm();
    }
    for (std::size_t i = 0; i < memory_.size(); ++i) {
      const auto& [s, yv] = memory_[i];
      const double beta = yv.dot(q) / yv.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Eigen::VectorXd dir = std::move(q);
    if (!(dir.dot(g) > 0) || !dir.allFinite()) {
      memory_.clear();
      dir = g;
    }
    const double step0 = memory_.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;

    std::vector<std::pair<double, DualState>> seen;
    LineFunction phi = [&](double t) {
      DualState s = dual_theta(anchor_, z_, b_, state_.y + t * dir, ridge_);
      ++report_.eig_decompositions;
      LinePoint p{s.theta, s.grad.dot(dir)};
      seen.emplace_back(t, std::move(s));
      return p;
    };

    LineSearchResult ls{};
    try {
      ls = wolfe_line_search(phi, LinePoint{state_.theta, g.dot(dir)}, step0, cfg_.wolfe_c1, cfg_.wolfe_c2);
    } catch (const NumericalError& e) {
      report_.termination = Termination::NumericalFailure;
      report_.message = e.what();
      return false;
    }
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& e) { return e.first == ls.step; });
    DualState next = std::move(it->second);

    Eigen::VectorXd s = next.y - state_.y;
    Eigen::VectorXd yv = state_.grad - next.grad;  // gradient change of ψ
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      memory_.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(memory_.size()) > cfg_.lbfgs_memory) memory_.pop_front();
    }
    state_ = std::move(next);
    return true;
  }

  const SymMatrix& anchor_;
  const SensingEnsemble& z_;
  const Eigen::VectorXd& b_;
  const SolverConfig& cfg_;
  SolverReport& report_;
  Monitor monitor_;
  DualState state_;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory_;  // (s, y) pairs, minimization sign
  double ridge_ = 0.0;
  int iterations_ = 0;
  bool feasible_ = false;
};

}  // namespace

SolveResult lbfgs_dual_project(const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                               const SolverConfig& cfg) {
  cfg.validate();
  require_measurements(z, b, "lbfgs_dual_project");
  if (anchor.dim() != z.n()) throw DomainError("lbfgs_dual_project: anchor dimension does not match n");
  const auto t0 = Clock::now();
  SolverReport report;
  DualAscent ascent(anchor, z, b, cfg, report);

  if (!cfg.l1_budget) {
    ascent.run(0.0, true);
  } else {
    double ridge = kRidgeStart;
    while (true) {
      const bool last = ridge < kRidgeFloor;
      const auto stage = ascent.run(last ? 0.0 : ridge, last);
      if (stage != DualAscent::Stage::StageDone) break;
      ridge *= kRidgeShrink;
    }
  }
  report.iterations = ascent.iterations();
  report.wall_time = seconds_since(t0);
  return {std::move(ascent.state().x_of_y), std::move(report)};
}

// ---------------------------------------------------------------------------
// Nesterov

SolveResult nesterov_feasibility(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg) {
  cfg.validate();
  require_measurements(z, b, "nesterov_feasibility");
  const auto t0 = Clock::now();
  SolverReport report;
  Monitor monitor(cfg, report);

  const Index n = z.n();
  const double eta = cfg.stepsize;
  SymMatrix x(n), x_prev(n), yk(n);
  Eigen::VectorXd zx = Eigen::VectorXd::Zero(z.m());  // Z(X_k)
  Eigen::VectorXd zx_prev = zx;
  Eigen::VectorXd zy = zx;  // Z(Y_k), tracked by linearity
  double theta = 1.0;

  bool done = monitor.record(zx - b);
  int k = 0;
  while (!done && k < cfg.max_iters) {
    ++k;
    SymMatrix grad = adjoint(z, zy - b);
    x_prev = std::move(x);
    zx_prev = zx;
    x = psd_project(yk - eta * grad);
    ++report.eig_decompositions;
    zx = apply(z, x);

    const double theta_next = 2.0 / (1.0 + std::sqrt(1.0 + 4.0 / (theta * theta)));
    const double beta = theta_next * (1.0 / theta - 1.0);
    theta = theta_next;
    yk = x + beta * (x - x_prev);
    zy = zx + beta * (zx - zx_prev);

    done = monitor.record(zx - b);
    if (!done && monitor.diverged()) break;
  }
  report.iterations = k;
  report.wall_time = seconds_since(t0);
  return {std::move(x), std::move(report)};
}

// ---------------------------------------------------------------------------
// Affine projection and Douglas-Rachford

namespace {

// Orthonormal coordinates of S^n: e_ii, and (e_ij + e_ji)/√2 for i < j.
Eigen::VectorXd sym_coords(const SymMatrix& x) {
  const Index n = x.dim();
  Eigen::VectorXd c(n * (n + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) c[k++] = i == j ? x(i, i) : std::sqrt(2.0) * x(i, j);
  return c;
}

SymMatrix from_sym_coords(const Eigen::VectorXd& c, Index n) {
  Eigen::MatrixXd a(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      const double v = i == j ? c[k] : c[k] / std::sqrt(2.0);
      a(i, j) = a(j, i) = v;
      ++k;
    }
  return SymMatrix::from_dense(a);
}

// Row i holds the coordinates of zᵢzᵢᵀ.
Eigen::MatrixXd dyad_coords(const SensingEnsemble& z) {
  Eigen::MatrixXd a(z.m(), z.n() * (z.n() + 1) / 2);
  for (Index i = 0; i < z.m(); ++i) a.row(i) = sym_coords(SymMatrix::outer(z.vector(i))).transpose();
  return a;
}

}  // namespace

AffineProjector::AffineProjector(const SensingEnsemble& z, Eigen::VectorXd b) : z_(z), b_(std::move(b)) {
  require_measurements(z, b_, "AffineProjector");
  if (z.m() > z.n() * (z.n() + 1) / 2) {
    overdetermined_ = true;
    cod_.compute(dyad_coords(z));
    cond_ = std::numeric_limits<double>::infinity();
    return;
  }
  const Eigen::MatrixXd inner = z.vectors().transpose() * z.vectors();
  gram_ = inner.array().square().matrix();
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success) {
    cond_ = std::numeric_limits<double>::infinity();
  } else {
    const double rc = llt_.rcond();
    cond_ = rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  }
  if (!(cond_ <= 1e12)) {
    std::ostringstream os;
    os << "affine projection is ill-posed: Gram matrix condition estimate " << cond_ << " (m=" << z.m()
       << ", n=" << z.n() << ")";
    throw IllPosedProjectionError(os.str());
  }
}

SymMatrix AffineProjector::project(const SymMatrix& x) const {
  if (x.dim() != z_.n()) throw DomainError("affine_project: dimension mismatch");
  if (overdetermined_) {
    const Eigen::VectorXd c = sym_coords(x);
    return from_sym_coords(c - cod_.solve(apply(z_, x) - b_), z_.n());
  }
  SymMatrix out = x - adjoint(z_, llt_.solve(apply(z_, x) - b_));
  // One refinement pass if the solve left a visible residual.
  Eigen::VectorXd r = apply(z_, out) - b_;
  const double tol = 1e-10 * std::max(1.0, b_.lpNorm<Eigen::Infinity>());
  if (r.lpNorm<Eigen::Infinity>() > 0.1 * tol) out -= adjoint(z_, llt_.solve(r));
  return out;
}

SymMatrix affine_project(const SymMatrix& x, const SensingEnsemble& z, const Eigen::VectorXd& b) {
  return AffineProjector(z, b).project(x);
}

SolveResult douglas_rachford(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg) {
  cfg.validate();
  require_measurements(z, b, "douglas_rachford");
  const auto t0 = Clock::now();
  SolverReport report;
  Monitor monitor(cfg, report);

  const AffineProjector proj(z, b);
  SymMatrix x(z.n()), y(z.n());
  bool done = monitor.record(apply(z, x) - b);
  int k = 0;
  while (!done && k < cfg.max_iters) {
    ++k;
    y = proj.project(2.0 * x - y) - x + y;
    x = psd_project(y);
    ++report.eig_decompositions;
    done = monitor.record(apply(z, x) - b);
    if (!done && monitor.diverged()) break;
  }
  report.iterations = k;
  report.wall_time = seconds_since(t0);
  return {std::move(x), std::move(report)};
}

// ---------------------------------------------------------------------------
// Factored gradient descent

SolveResult fgd(const SensingEnsemble& z, const Eigen::VectorXd& b, const SolverConfig& cfg) {
  cfg.validate();
  require_measurements(z, b, "fgd");
  if (!cfg.rank) throw DomainError("fgd: factor rank must be set");
  const Index r = *cfg.rank;
  if (r > z.n()) throw DomainError("fgd: factor rank must lie in [1, n]");
  const auto t0 = Clock::now();
  SolverReport report;
  Monitor monitor(cfg, report);
  const Eigen::MatrixXd& zv = z.vectors();

  // Spectral initialization: top-r PSD part of Z*(b), then a scalar fit to b.
  EigenDecomposition eig = eigh(adjoint(z, b));
  report.eig_decompositions = 1;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(z.n(), r);
  for (Index j = 0; j < r && eig.values(j) > 0; ++j) u.col(j) = eig.vectors.col(j) * std::sqrt(eig.values(j));

  // Z(U Uᵀ)ᵢ = ‖Uᵀzᵢ‖².
  auto measure_factor = [&](const Eigen::MatrixXd& f, Eigen::MatrixXd& proj) {
    proj.noalias() = zv.transpose() * f;
    return Eigen::VectorXd(proj.rowwise().squaredNorm());
  };
  Eigen::MatrixXd zu;
  Eigen::VectorXd a = measure_factor(u, zu);
  const double aa = a.squaredNorm();
  const double s2 = aa > 0 ? std::max(0.0, a.dot(b) / aa) : 0.0;
  u *= std::sqrt(s2);
  zu *= std::sqrt(s2);
  Eigen::VectorXd residual = s2 * a - b;

  const double eta = cfg.stepsize;
  bool done = monitor.record(residual);
  int k = 0;
  while (!done && k < cfg.max_iters) {
    ++k;
    // ∇f(X) U = Z diag(res) Zᵀ U
    u -= eta * (zv * (residual.asDiagonal() * zu));
    residual = measure_factor(u, zu) - b;
    done = monitor.record(residual);
    if (!done && monitor.diverged()) break;
  }
  report.iterations = k;
  report.wall_time = seconds_since(t0);
  return {SymMatrix::from_dense(u * u.transpose()), std::move(report)};
}

// ---------------------------------------------------------------------------

std::string_view to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Lbfgs:
      return "lbfgs";
    case SolverKind::Nesterov:
      return "nesterov";
    case SolverKind::DouglasRachford:
      return "dr";
    case SolverKind::Fgd:
      return "fgd";
  }
  return "unknown";
}

SolverKind parse_solver(std::string_view s) {
  if (s == "lbfgs") return SolverKind::Lbfgs;
  if (s == "nesterov") return SolverKind::Nesterov;
  if (s == "dr") return SolverKind::DouglasRachford;
  if (s == "fgd") return SolverKind::Fgd;
  throw DomainError("unknown solver '" + std::string(s) + "'");
}

SolveResult solve(SolverKind kind, const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
                  const SolverConfig& cfg) {
  switch (kind) {
    case SolverKind::Lbfgs:
      return lbfgs_dual_project(anchor, z, b, cfg);
    case SolverKind::Nesterov:
      return nesterov_feasibility(z, b, cfg);
    case SolverKind::DouglasRachford:
      return douglas_rachford(z, b, cfg);
    case SolverKind::Fgd:
      return fgd(z, b, cfg);
  }
  throw DomainError("unknown solver kind");
}

}  // namespace feasrop
