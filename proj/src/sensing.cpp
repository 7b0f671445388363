#include "feasrop/sensing.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "feasrop/dat.hpp"
#include "feasrop/errors.hpp"
#include "feasrop/random.hpp"

namespace feasrop {

namespace {

void require_dim(const SensingEnsemble& z, const SymMatrix& x, const char* what) {
  if (x.dim() != z.n()) {
    std::ostringstream os;
    os << what << ": matrix dimension " << x.dim() << " does not match ensemble dimension " << z.n();
    throw DomainError(os.str());
  }
}

}  // namespace

std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::UnitSphere:
      return "unit-sphere";
    case Distribution::Gaussian:
      return "gaussian";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view s) {
  if (s == "unit-sphere") return Distribution::UnitSphere;
  if (s == "gaussian") return Distribution::Gaussian;
  throw DomainError("unknown distribution tag '" + std::string(s) + "'");
}

SensingEnsemble::SensingEnsemble(Eigen::MatrixXd vectors, std::uint64_t seed, Distribution distribution)
    : z_(std::move(vectors)), seed_(seed), dist_(distribution) {
  if (z_.rows() < 1 || z_.cols() < 1) throw DomainError("SensingEnsemble: need n >= 1 and m >= 1");
  if (dist_ == Distribution::UnitSphere) {
    for (Index i = 0; i < z_.cols(); ++i) {
      if (std::abs(z_.col(i).norm() - 1.0) > 1e-12)
        throw DomainError("SensingEnsemble: unit-sphere vector " + std::to_string(i) + " is not unit norm");
    }
  }
}

void SensingEnsemble::write(std::ostream& os) const {
  os << n() << ' ' << m() << ' ' << seed_ << ' ' << to_string(dist_) << '\n';
  for (Index i = 0; i < m(); ++i) {
    for (Index k = 0; k < n(); ++k) {
      if (k) os << ' ';
      os << format_value(z_(k, i));
    }
    os << '\n';
  }
}

SensingEnsemble SensingEnsemble::read(std::istream& is) {
  long long n = 0, m = 0;
  std::uint64_t seed = 0;
  std::string dist;
  if (!(is >> n >> m >> seed >> dist)) throw DomainError("ensemble file: malformed header");
  if (n < 1 || m < 1) throw DomainError("ensemble file: n and m must be positive");
  Eigen::MatrixXd z(n, m);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < n; ++k)
      if (!(is >> z(k, i))) throw DomainError("ensemble file: truncated at vector " + std::to_string(i));
  return SensingEnsemble(std::move(z), seed, parse_distribution(dist));
}

SensingEnsemble sample_ensemble(Index n, Index m, std::uint64_t seed, Distribution distribution) {
  if (n < 1 || m < 1) throw DomainError("sample_ensemble: need n >= 1 and m >= 1");
  Rng rng(seed);
  Eigen::MatrixXd z = rng.normal_matrix(n, m);
  if (distribution == Distribution::UnitSphere) z.colwise().normalize();
  return SensingEnsemble(std::move(z), seed, distribution);
}

Eigen::VectorXd apply(const SensingEnsemble& z, const SymMatrix& x) {
  require_dim(z, x, "apply");
  const Eigen::MatrixXd xz = x.dense() * z.vectors();
  return z.vectors().cwiseProduct(xz).colwise().sum().transpose();
}

SymMatrix adjoint(const SensingEnsemble& z, const Eigen::VectorXd& y) {
  if (y.size() != z.m()) throw DomainError("adjoint: vector length does not match measurement count");
  const Eigen::MatrixXd zy = z.vectors() * y.asDiagonal();
  return SymMatrix::from_dense(zy * z.vectors().transpose());
}

void MeasurementSet::write(std::ostream& os) const {
  os << b.size() << ' ' << format_value(noise_l1) << '\n';
  for (Index i = 0; i < b.size(); ++i) os << format_value(b(i)) << '\n';
}

MeasurementSet MeasurementSet::read(std::istream& is) {
  long long m = 0;
  MeasurementSet out;
  if (!(is >> m >> out.noise_l1)) throw DomainError("measurement file: malformed header");
  if (m < 1) throw DomainError("measurement file: m must be positive");
  if (out.noise_l1 < 0) throw DomainError("measurement file: noise budget must be nonnegative");
  out.b.resize(m);
  for (Index i = 0; i < m; ++i)
    if (!(is >> out.b(i))) throw DomainError("measurement file: truncated at entry " + std::to_string(i));
  return out;
}

MeasurementSet measure(const SensingEnsemble& z, const SymMatrix& x0, const NoiseModel& model, std::uint64_t seed) {
  require_dim(z, x0, "measure");
  MeasurementSet out;
  out.b = apply(z, x0);
  if (const auto* u = std::get_if<noise::Uniform>(&model)) {
    if (!(u->eps >= 0.0)) throw DomainError("measure: noise level must be nonnegative");
    Rng rng(seed);
    Eigen::VectorXd eta(z.m());
    for (Index i = 0; i < z.m(); ++i) eta(i) = u->eps > 0 ? rng.uniform(-u->eps, u->eps) : 0.0;
    out.b += eta;
    out.noise_l1 = static_cast<double>(z.m()) * u->eps;
    out.eta = std::move(eta);
  } else if (const auto* e = std::get_if<noise::Explicit>(&model)) {
    if (e->eta.size() != z.m()) throw DomainError("measure: noise vector length does not match m");
    out.b += e->eta;
    out.noise_l1 = e->eta.lpNorm<1>();
    out.eta = e->eta;
  }
  return out;
}

SymMatrix covariance_sigma(const SensingEnsemble& z) {
  return adjoint(z, Eigen::VectorXd::Ones(z.m())) * (1.0 / static_cast<double>(z.m()));
}

TransformContext build_transform(const SensingEnsemble& z) {
  SymMatrix sigma = covariance_sigma(z);
  EigenDecomposition eig = eigh(sigma);
  const double smax = eig.values(0);
  const double smin = eig.values(eig.values.size() - 1);
  if (z.m() < z.n() || !(smin > kEigenClampRel * smax)) {
    std::ostringstream os;
    os << "build_transform: second-moment matrix is singular (n=" << z.n() << ", m=" << z.m()
       << ", min eigenvalue " << smin << ")";
    throw RankDeficiencyError(os.str());
  }
  TransformContext ctx{std::move(sigma), spectral_compose(eig.vectors, eig.values.cwiseSqrt()),
                       spectral_compose(eig.vectors, eig.values.cwiseSqrt().cwiseInverse()), smin, smax};
  return ctx;
}

SymMatrix g_forward(const TransformContext& ctx, const SymMatrix& x) {
  if (x.dim() != ctx.v.dim()) throw DomainError("g_forward: dimension mismatch");
  return congruence(x, ctx.v.dense());
}

SymMatrix g_inverse(const TransformContext& ctx, const SymMatrix& y) {
  if (y.dim() != ctx.v.dim()) throw DomainError("g_inverse: dimension mismatch");
  return congruence(y, ctx.v_inv.dense());
}

Eigen::VectorXd transformed_apply(const TransformContext& ctx, const SensingEnsemble& z, const SymMatrix& y) {
  if (y.dim() != ctx.v.dim() || z.n() != ctx.v.dim()) throw DomainError("transformed_apply: dimension mismatch");
  const Eigen::MatrixXd w = ctx.v_inv.dense() * z.vectors();
  const Eigen::MatrixXd yw = y.dense() * w;
  return w.cwiseProduct(yw).colwise().sum().transpose();
}

Eigen::VectorXd induced_asymmetric_apply(const SensingEnsemble& z, const SymMatrix& x) {
  if (z.m() < 2) throw DomainError("induced_asymmetric_apply: need at least two measurements");
  const Eigen::VectorXd raw = apply(z, x);
  const Index half = z.m() / 2;
  Eigen::VectorXd out(half);
  for (Index i = 0; i < half; ++i) out(i) = 0.5 * (raw(2 * i) - raw(2 * i + 1));
  return out;
}

MeasurementSet phase_retrieval_measure(const Eigen::VectorXd& x0, const SensingEnsemble& z) {
  if (x0.size() != z.n()) throw DomainError("phase_retrieval_measure: signal length does not match n");
  MeasurementSet out;
  out.b = (z.vectors().transpose() * x0).array().square().matrix();
  return out;
}

}  // namespace feasrop
