#include <doctest.h>

#include <cmath>
#include <sstream>

#include "feasrop/errors.hpp"
#include "feasrop/sensing.hpp"
#include "support.hpp"

using namespace feasrop;
using feasrop::testing::random_psd;
using feasrop::testing::random_sym;
using feasrop::testing::rel_diff;

namespace {

SensingEnsemble explicit_ensemble(const Eigen::MatrixXd& v) { return SensingEnsemble(v, 0, Distribution::Gaussian); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("sample_ensemble") {
  const auto z = sample_ensemble(3, 5, 7);
  CHECK(z.n() == 3);
  CHECK(z.m() == 5);
  for (Index i = 0; i < z.m(); ++i) CHECK(std::abs(z.vector(i).norm() - 1.0) <= 1e-12);

  CHECK(sample_ensemble(3, 5, 7).vectors() == z.vectors());
  CHECK(sample_ensemble(3, 5, 8).vectors() != z.vectors());

  const auto big = sample_ensemble(50, 5000, 99);
  CHECK(big.vectors().rowwise().mean().norm() < 0.1);

  const auto g = sample_ensemble(4, 200, 1, Distribution::Gaussian);
  bool any_off_sphere = false;
  for (Index i = 0; i < g.m(); ++i) any_off_sphere |= std::abs(g.vector(i).norm() - 1.0) > 1e-3;
  CHECK(any_off_sphere);

  CHECK_THROWS_AS(sample_ensemble(0, 5, 1), DomainError);
  CHECK_THROWS_AS(sample_ensemble(3, 0, 1), DomainError);
  CHECK_THROWS_AS(SensingEnsemble(Eigen::MatrixXd::Ones(2, 2), 0, Distribution::UnitSphere), DomainError);
}

TEST_CASE("ensemble text format round-trips exactly") {
  const auto z = sample_ensemble(4, 6, 123, Distribution::Gaussian);
  std::stringstream ss;
  z.write(ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "4 6 123 gaussian");
  ss.seekg(0);
  const auto back = SensingEnsemble::read(ss);
  CHECK(back.vectors() == z.vectors());
  CHECK(back.seed() == 123);
  CHECK(back.distribution() == Distribution::Gaussian);

  std::istringstream bad("2 1 0 unit-sphere\n1 1\n");
  CHECK_THROWS_AS(SensingEnsemble::read(bad), DomainError);
}

TEST_CASE("apply") {
  const auto z = sample_ensemble(5, 9, 2);
  CHECK(apply(z, SymMatrix::zero(5)).isZero());
  CHECK((apply(z, SymMatrix::identity(5)) - Eigen::VectorXd::Ones(9)).lpNorm<Eigen::Infinity>() < 1e-12);

  const auto half = explicit_ensemble(Eigen::Vector2d(1, 1) / std::sqrt(2.0));
  CHECK(apply(half, SymMatrix::diagonal(Eigen::Vector2d(1, 0)))[0] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(apply(z, SymMatrix::identity(4)), DomainError);
}

TEST_CASE("apply is linear") {
  Rng rng(4);
  const auto z = sample_ensemble(6, 20, 3);
  for (int t = 0; t < 10; ++t) {
    const SymMatrix x = random_sym(6, rng), w = random_sym(6, rng);
    const double a = rng.normal(), b = rng.normal();
    CHECK(rel_diff(apply(z, a * x + b * w), a * apply(z, x) + b * apply(z, w)) < 1e-10);
  }
}

TEST_CASE("adjoint") {
  const auto z = sample_ensemble(4, 7, 5);
  CHECK(adjoint(z, Eigen::VectorXd::Zero(7)) == SymMatrix::zero(4));

  const auto e1 = explicit_ensemble(Eigen::Vector3d(1, 0, 0));
  CHECK(adjoint(e1, Eigen::VectorXd::Constant(1, 2.0)) == SymMatrix::diagonal(Eigen::Vector3d(2, 0, 0)));

  CHECK_THROWS_AS(adjoint(z, Eigen::VectorXd::Zero(6)), DomainError);

  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + t % 7, m = 3 + 2 * t;
    const auto zz = sample_ensemble(n, m, 100 + t);
    const SymMatrix x = random_sym(n, rng);
    const Eigen::VectorXd y = rng.normal_vector(m);
    CHECK(rel_err(adjoint(zz, y).inner(x), y.dot(apply(zz, x))) < 1e-10);
  }
}

TEST_CASE("measure") {
  const auto z = sample_ensemble(4, 30, 9);
  Rng rng(1);
  const SymMatrix x0 = random_psd(4, 2, rng);
  const Eigen::VectorXd clean = apply(z, x0);

  const auto none = measure(z, x0);
  CHECK(none.b == clean);
  CHECK(none.noise_l1 == 0.0);
  CHECK_FALSE(none.eta.has_value());

  const auto uni = measure(z, x0, noise::Uniform{0.01}, 4);
  CHECK((uni.b - clean).lpNorm<Eigen::Infinity>() <= 0.01);
  CHECK(uni.noise_l1 == doctest::Approx(30 * 0.01));
  REQUIRE(uni.eta.has_value());
  CHECK(uni.eta->lpNorm<1>() <= uni.noise_l1 + 1e-12);
  CHECK(measure(z, x0, noise::Uniform{0.01}, 4).b == uni.b);

  const auto e2 = explicit_ensemble(Eigen::MatrixXd::Identity(2, 2));
  const auto ex = measure(e2, SymMatrix::identity(2), noise::Explicit{Eigen::Vector2d(0.1, -0.2)});
  CHECK(ex.noise_l1 == doctest::Approx(0.3).epsilon(1e-15));

  CHECK_THROWS_AS(measure(z, x0, noise::Uniform{-1.0}), DomainError);
  CHECK_THROWS_AS(measure(z, SymMatrix::identity(3)), DomainError);
}

TEST_CASE("measurement text format round-trips exactly") {
  const auto z = sample_ensemble(3, 5, 1);
  const auto meas = measure(z, SymMatrix::identity(3), noise::Uniform{0.1}, 2);
  std::stringstream ss;
  meas.write(ss);
  const auto back = MeasurementSet::read(ss);
  CHECK(back.b == meas.b);
  CHECK(back.noise_l1 == meas.noise_l1);
}

TEST_CASE("rotation invariance in distribution") {
  const Index n = 5, m = 10;
  Rng rng(31);
  const Eigen::VectorXd lambda = (Eigen::VectorXd(n) << 3, 1, 0.5, 0, -1).finished();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(rng.normal_matrix(n, n)).householderQ();
  const SymMatrix diag = SymMatrix::diagonal(lambda);
  const SymMatrix rotated = spectral_compose(q, lambda);

  Eigen::VectorXd a(2000 * m), b(2000 * m);
  for (int t = 0; t < 2000; ++t) {
    a.segment(t * m, m) = apply(sample_ensemble(n, m, derive_seed(77, {0, std::uint64_t(t)})), diag);
    b.segment(t * m, m) = apply(sample_ensemble(n, m, derive_seed(77, {1, std::uint64_t(t)})), rotated);
  }
  auto var = [](const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().mean(); };
  CHECK(std::abs(a.mean() - b.mean()) <= 0.05 * std::abs(a.mean()));
  CHECK(std::abs(var(a) - var(b)) <= 0.05 * var(a));
}

TEST_CASE("covariance_sigma") {
  const auto e1 = explicit_ensemble(Eigen::Vector3d(1, 0, 0));
  CHECK(covariance_sigma(e1) == SymMatrix::diagonal(Eigen::Vector3d(1, 0, 0)));
  CHECK(covariance_sigma(sample_ensemble(6, 40, 3)).trace() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_transform") {
  const Index n = 4;
  const auto basis = explicit_ensemble(std::sqrt(double(n)) * Eigen::MatrixXd::Identity(n, n));
  const auto id = build_transform(basis);
  CHECK(rel_diff(id.v, SymMatrix::identity(n)) < 1e-12);
  Rng rng(2);
  const SymMatrix x = random_sym(n, rng);
  CHECK(rel_diff(g_forward(id, x), x) < 1e-12);
  CHECK(rel_diff(g_inverse(id, x), x) < 1e-12);

  const auto z = sample_ensemble(6, 50, 8);
  const auto ctx = build_transform(z);
  CHECK(rel_diff(SymMatrix::from_dense(ctx.v.dense() * ctx.v.dense()), ctx.sigma) < 1e-8);
  CHECK((ctx.v.dense() * ctx.v_inv.dense() - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-8);
  const auto e = eigh(ctx.sigma);
  CHECK(std::abs(ctx.sigma_max - e.values[0]) < 1e-10);
  CHECK(std::abs(ctx.sigma_min - e.values[5]) < 1e-10);

  CHECK_THROWS_AS(build_transform(sample_ensemble(6, 5, 1)), RankDeficiencyError);
  Eigen::MatrixXd dup(2, 3);
  dup << 1, 1, 0, 0, 0, 1;
  CHECK_THROWS_AS(build_transform(explicit_ensemble(dup.leftCols(2))), RankDeficiencyError);
}

TEST_CASE("g is a PSD-preserving bijection consistent with the transformed map") {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const Index n = 3 + t;
    const auto z = sample_ensemble(n, 4 * n, 40 + t);
    const auto ctx = build_transform(z);
    const SymMatrix x = random_sym(n, rng);
    CHECK(rel_diff(g_inverse(ctx, g_forward(ctx, x)), x) < 1e-8);
    CHECK(rel_diff(transformed_apply(ctx, z, g_forward(ctx, x)), apply(z, x)) < 1e-8);
    CHECK(min_eigenvalue(g_forward(ctx, random_psd(n, 1, rng))) >= -1e-10);
  }
  const auto z = sample_ensemble(3, 9, 1);
  const auto ctx = build_transform(z);
  CHECK(transformed_apply(ctx, z, SymMatrix::zero(3)).isZero());
  CHECK_THROWS_AS(g_forward(ctx, SymMatrix::identity(4)), DomainError);
  CHECK_THROWS_AS(transformed_apply(ctx, z, SymMatrix::identity(2)), DomainError);
}

TEST_CASE("induced_asymmetric_apply") {
  const auto z = sample_ensemble(5, 11, 3);
  CHECK(induced_asymmetric_apply(z, SymMatrix::identity(5)).size() == 5);
  CHECK(induced_asymmetric_apply(z, SymMatrix::identity(5)).lpNorm<Eigen::Infinity>() < 1e-12);

  // Raw measurements (3, 1) give ½(3 − 1).
  Eigen::MatrixXd v(2, 2);
  v << std::sqrt(3.0), 0, 0, 1;
  CHECK(induced_asymmetric_apply(explicit_ensemble(v), SymMatrix::identity(2))[0] == doctest::Approx(1.0));

  Rng rng(9);
  const SymMatrix x = random_sym(5, rng);
  const Eigen::VectorXd out = induced_asymmetric_apply(z, x);
  for (Index i = 0; i < 5; ++i) {
    const Eigen::VectorXd a = z.vector(2 * i), b = z.vector(2 * i + 1);
    CHECK(std::abs(out[i] - 0.5 * (a + b).dot(x.dense() * (a - b))) < 1e-10);
  }
  CHECK_THROWS_AS(induced_asymmetric_apply(sample_ensemble(5, 1, 1), x), DomainError);
}

TEST_CASE("phase_retrieval_measure") {
  const auto z = sample_ensemble(6, 15, 4);
  CHECK(phase_retrieval_measure(Eigen::VectorXd::Zero(6), z).b.isZero());
  const auto e1 = explicit_ensemble(Eigen::Vector2d(1, 0));
  CHECK(phase_retrieval_measure(Eigen::Vector2d(1, 0), e1).b[0] == 1.0);

  Rng rng(5);
  const Eigen::VectorXd x0 = rng.normal_vector(6);
  const auto pr = phase_retrieval_measure(x0, z);
  CHECK((pr.b - measure(z, SymMatrix::outer(x0)).b).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(pr.noise_l1 == 0.0);
  CHECK_THROWS_AS(phase_retrieval_measure(Eigen::VectorXd::Zero(5), z), DomainError);
}
