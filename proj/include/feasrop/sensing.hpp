#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "feasrop/spectral.hpp"

namespace feasrop {

enum class Distribution { UnitSphere, Gaussian };

std::string_view to_string(Distribution d);
/// Accepts "unit-sphere" and "gaussian".
Distribution parse_distribution(std::string_view s);

/// m sensing vectors of dimension n, stored as the columns of an n×m matrix.
/// Realizes the map X ↦ (zᵢᵀ X zᵢ)ᵢ.
class SensingEnsemble {
 public:
  SensingEnsemble(Eigen::MatrixXd vectors, std::uint64_t seed, Distribution distribution);

  Index n() const { return z_.rows(); }
  Index m() const { return z_.cols(); }
  std::uint64_t seed() const { return seed_; }
  Distribution distribution() const { return dist_; }
  const Eigen::MatrixXd& vectors() const { return z_; }
  Eigen::VectorXd vector(Index i) const { return z_.col(i); }

  /// Text format: header `n m seed distribution`, then one line of n values per vector.
  void write(std::ostream& os) const;
  static SensingEnsemble read(std::istream& is);

 private:
  Eigen::MatrixXd z_;
  std::uint64_t seed_;
  Distribution dist_;
};

SensingEnsemble sample_ensemble(Index n, Index m, std::uint64_t seed,
                                Distribution distribution = Distribution::UnitSphere);

Eigen::VectorXd apply(const SensingEnsemble& z, const SymMatrix& x);
/// Σᵢ yᵢ zᵢ zᵢᵀ
SymMatrix adjoint(const SensingEnsemble& z, const Eigen::VectorXd& y);

struct MeasurementSet {
  Eigen::VectorXd b;
  double noise_l1 = 0.0;
  std::optional<Eigen::VectorXd> eta;

  /// Text format: header `m noise_l1`, then one value of b per line.
  void write(std::ostream& os) const;
  static MeasurementSet read(std::istream& is);
};

namespace noise {
struct None {};
/// i.i.d. uniform on [-eps, eps]; declared budget m·eps.
struct Uniform {
  double eps;
};
struct Explicit {
  Eigen::VectorXd eta;
};
}  // namespace noise

using NoiseModel = std::variant<noise::None, noise::Uniform, noise::Explicit>;

MeasurementSet measure(const SensingEnsemble& z, const SymMatrix& x0, const NoiseModel& model = noise::None{},
                       std::uint64_t seed = 0);

/// (1/m) Σ zᵢzᵢᵀ
SymMatrix covariance_sigma(const SensingEnsemble& z);

/// Coordinate change built from the ensemble's second-moment matrix Σ = V V.
struct TransformContext {
  SymMatrix sigma;
  SymMatrix v;
  SymMatrix v_inv;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

/// Throws RankDeficiencyError when Σ is singular.
TransformContext build_transform(const SensingEnsemble& z);
/// Vᵀ X V
SymMatrix g_forward(const TransformContext& ctx, const SymMatrix& x);
/// V⁻ᵀ Y V⁻¹
SymMatrix g_inverse(const TransformContext& ctx, const SymMatrix& y);
/// ((V⁻¹zᵢ)ᵀ Y (V⁻¹zᵢ))ᵢ
Eigen::VectorXd transformed_apply(const TransformContext& ctx, const SensingEnsemble& z, const SymMatrix& y);

/// Half-differences of consecutive measurement pairs; a trailing odd measurement is dropped.
Eigen::VectorXd induced_asymmetric_apply(const SensingEnsemble& z, const SymMatrix& x);

/// bᵢ = ⟨x0, zᵢ⟩²
MeasurementSet phase_retrieval_measure(const Eigen::VectorXd& x0, const SensingEnsemble& z);

}  // namespace feasrop
