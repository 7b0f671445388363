#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "feasrop/random.hpp"
#include "feasrop/sensing.hpp"
#include "feasrop/spectral.hpp"

namespace feasrop {

/// Empirical two-sided bounds of ‖Z′(X)‖₁ / (⌊m/2⌋‖X‖_F) over sampled rank-r X.
/// These are estimates from a finite sample, not certified constants.
struct SrubEstimate {
  Index rank = 0;
  int trials = 0;
  std::vector<double> ratios;
  double c1_hat = 0.0;  // min ratio
  double c2_hat = 0.0;  // max ratio
};

/// ‖Z′(X)‖₁ / (⌊m/2⌋‖X‖_F) for one matrix. Throws DomainError for X = 0.
double srub_ratio(const SensingEnsemble& z, const SymMatrix& x);

/// G Gᵀ − H Hᵀ with n×⌈r/2⌉ Gaussian factors, truncated to its r largest-magnitude
/// eigenpairs and scaled to unit Frobenius norm.
SymMatrix random_rank_r_symmetric(Index n, Index r, Rng& rng);

SrubEstimate srub_estimate(const SensingEnsemble& z, Index r, int trials, std::uint64_t seed);

struct SigmaConditionReport {
  double ratio = 0.0;  // σ_max / σ_min
  double min = 0.0;    // σ_min / scale
  double scale = 0.0;  // tr(Σ)/n, the isotropic level Σ concentrates around
  bool pass_ratio = false;
  bool pass_min = false;
};

/// ratio ≤ √2 and σ_min ≥ 2√2 − 2, with σ_min measured relative to tr(Σ)/n so
/// unit-sphere (Σ ≈ I/n) and Gaussian (Σ ≈ I) ensembles share one threshold.
SigmaConditionReport sigma_condition_check(const TransformContext& ctx);

struct TraceFlatnessReport {
  double trace = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
};

/// Checks (Σb − budget)/m ≤ tr(Y) ≤ (Σb + budget)/m up to 1e-8·max(1, |hi|).
TraceFlatnessReport trace_flatness_check(const SymMatrix& y, const Eigen::VectorXd& b, double noise_l1, Index m);

struct BoundInputs {
  double c1 = 1.0;
  double c2 = 1.0;
  double r = 1.0;
  double tail_norm = 0.0;
  double noise_l1 = 0.0;
  double m = 1.0;
};

/// c1·tail/√r + c2·noise/m
double error_bound_rhs(const BoundInputs& in);

/// λᵢ = i^{-3/2} − (i+1)^{-3/2}, i = 1..n.
Eigen::VectorXd decaying_spectrum_values(Index n);
SymMatrix decaying_spectrum_matrix(Index n);

/// Closed-form tail of the decaying spectrum after removing the r leading
/// eigenvalues: (r+1)^{-3/2} − (n+1)^{-3/2}.
double decaying_spectrum_tail(Index n, Index r);

/// ⌊m / (C·n)⌋, at least 1 and at most n.
Index effective_rank(Index m, Index n, double c = 1.0);

/// ‖X − X₀‖_F
double recovery_error(const SymMatrix& x, const SymMatrix& x0);

}  // namespace feasrop
