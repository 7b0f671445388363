#include "feasrop/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feasrop/errors.hpp"

namespace feasrop {

double srub_ratio(const SensingEnsemble& z, const SymMatrix& x) {
  const double fro = x.frobenius_norm();
  if (!(fro > 0)) throw DomainError("srub_ratio: matrix must be nonzero");
  const Eigen::VectorXd zp = induced_asymmetric_apply(z, x);
  return zp.lpNorm<1>() / (static_cast<double>(zp.size()) * fro);
}

SymMatrix random_rank_r_symmetric(Index n, Index r, Rng& rng) {
  if (r < 1 || r > n) throw DomainError("random_rank_r_symmetric: r must lie in [1, n]");
  const Index k = (r + 1) / 2;
  const Eigen::MatrixXd g = rng.normal_matrix(n, k);
  const Eigen::MatrixXd h = rng.normal_matrix(n, k);
  EigenDecomposition eig = eigh(SymMatrix::from_dense(g * g.transpose() - h * h.transpose()));

  // Keep the r eigenpairs of largest magnitude.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(eig.values(a)) > std::abs(eig.values(b)); });
  Eigen::MatrixXd u(n, r);
  Eigen::VectorXd w(r);
  for (Index j = 0; j < r; ++j) {
    u.col(j) = eig.vectors.col(order[j]);
    w(j) = eig.values(order[j]);
  }
  SymMatrix x = spectral_compose(u, w);
  return x * (1.0 / x.frobenius_norm());
}

SrubEstimate srub_estimate(const SensingEnsemble& z, Index r, int trials, std::uint64_t seed) {
  if (r < 1 || r > z.n()) throw DomainError("srub_estimate: r must lie in [1, n]");
  if (trials < 1) throw DomainError("srub_estimate: trials must be positive");
  SrubEstimate est;
  est.rank = r;
  est.trials = trials;
  est.ratios.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    est.ratios.push_back(srub_ratio(z, random_rank_r_symmetric(z.n(), r, rng)));
  }
  const auto [lo, hi] = std::minmax_element(est.ratios.begin(), est.ratios.end());
  est.c1_hat = *lo;
  est.c2_hat = *hi;
  return est;
}

SigmaConditionReport sigma_condition_check(const TransformContext& ctx) {
  SigmaConditionReport rep;
  rep.scale = ctx.sigma.trace() / static_cast<double>(ctx.sigma.dim());
  rep.min = ctx.sigma_min / rep.scale;
  rep.ratio = ctx.sigma_max / ctx.sigma_min;
  rep.pass_ratio = rep.ratio <= std::sqrt(2.0);
  rep.pass_min = rep.min >= 2.0 * std::sqrt(2.0) - 2.0;
  return rep;
}

TraceFlatnessReport trace_flatness_check(const SymMatrix& y, const Eigen::VectorXd& b, double noise_l1, Index m) {
  if (m < 1 || b.size() != m) throw DomainError("trace_flatness_check: b must have length m >= 1");
  if (noise_l1 < 0) throw DomainError("trace_flatness_check: noise budget must be nonnegative");
  TraceFlatnessReport rep;
  const double sum = b.sum();
  const double md = static_cast<double>(m);
  rep.trace = y.trace();
  rep.lo = (sum - noise_l1) / md;
  rep.hi = (sum + noise_l1) / md;
  const double tol = 1e-8 * std::max(1.0, std::abs(rep.hi));
  rep.pass = rep.lo - tol <= rep.trace && rep.trace <= rep.hi + tol;
  return rep;
}

double error_bound_rhs(const BoundInputs& in) {
  if (in.c1 < 0 || in.c2 < 0 || in.tail_norm < 0 || in.noise_l1 < 0)
    throw DomainError("error_bound_rhs: inputs must be nonnegative");
  if (in.r < 1) throw DomainError("error_bound_rhs: rank must be at least 1");
  if (!(in.m > 0)) throw DomainError("error_bound_rhs: m must be positive");
  return in.c1 * in.tail_norm / std::sqrt(in.r) + in.c2 * in.noise_l1 / in.m;
}

Eigen::VectorXd decaying_spectrum_values(Index n) {
  if (n < 1) throw DomainError("decaying_spectrum: n must be positive");
  Eigen::VectorXd d(n);
  for (Index i = 1; i <= n; ++i) {
    const double a = static_cast<double>(i);
    d(i - 1) = std::pow(a, -1.5) - std::pow(a + 1.0, -1.5);
  }
  return d;
}

SymMatrix decaying_spectrum_matrix(Index n) { return SymMatrix::diagonal(decaying_spectrum_values(n)); }

double decaying_spectrum_tail(Index n, Index r) {
  if (r < 0 || r > n) throw DomainError("decaying_spectrum_tail: r must lie in [0, n]");
  return std::pow(static_cast<double>(r + 1), -1.5) - std::pow(static_cast<double>(n + 1), -1.5);
}

Index effective_rank(Index m, Index n, double c) {
  if (m < 1 || n < 1 || !(c > 0)) throw DomainError("effective_rank: need m, n >= 1 and C > 0");
  const auto r = static_cast<Index>(std::floor(static_cast<double>(m) / (c * static_cast<double>(n))));
  return std::clamp<Index>(r, 1, n);
}

double recovery_error(const SymMatrix& x, const SymMatrix& x0) {
  if (x.dim() != x0.dim()) throw DomainError("recovery_error: dimension mismatch");
  return (x.dense() - x0.dense()).norm();
}

}  // namespace feasrop
