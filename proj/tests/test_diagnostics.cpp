#include <doctest.h>

#include <cmath>

#include "feasrop/diagnostics.hpp"
#include "feasrop/errors.hpp"
#include "feasrop/harness.hpp"
#include "support.hpp"

using namespace feasrop;
using feasrop::testing::random_psd;
using feasrop::testing::random_sym;

namespace {

// Kernel of X ↦ Z(X) on S^n, from a dense LU of the coordinate matrix.
std::vector<SymMatrix> null_space(const SensingEnsemble& z) {
  const Index n = z.n(), d = n * (n + 1) / 2;
  std::vector<std::pair<Index, Index>> idx;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) idx.emplace_back(i, j);
  Eigen::MatrixXd a(z.m(), d);
  for (Index r = 0; r < z.m(); ++r)
    for (Index k = 0; k < d; ++k) {
      const auto [i, j] = idx[k];
      const double zi = z.vectors()(i, r), zj = z.vectors()(j, r);
      a(r, k) = i == j ? zi * zi : 2 * zi * zj;
    }
  const Eigen::MatrixXd ker = Eigen::FullPivLU<Eigen::MatrixXd>(a).kernel();
  std::vector<SymMatrix> out;
  for (Index c = 0; c < ker.cols(); ++c) {
    Eigen::MatrixXd x(n, n);
    for (Index k = 0; k < d; ++k) {
      const auto [i, j] = idx[k];
      x(i, j) = x(j, i) = ker(k, c);
    }
    out.push_back(SymMatrix::from_dense(x));
  }
  return out;
}

SensingEnsemble rotated(const SensingEnsemble& z, const Eigen::MatrixXd& q) {
  return SensingEnsemble(q * z.vectors(), z.seed(), z.distribution());
}

}  // namespace

TEST_CASE("srub_ratio is scale and rotation invariant") {
  Rng rng(1);
  const auto z = sample_ensemble(8, 41, 2);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(rng.normal_matrix(8, 8)).householderQ();
  for (int t = 0; t < 10; ++t) {
    const SymMatrix x = random_rank_r_symmetric(8, 1 + t % 4, rng);
    const double r = srub_ratio(z, x);
    CHECK(std::abs(srub_ratio(z, 3.7 * x) - r) < 1e-10 * r);
    CHECK(std::abs(srub_ratio(rotated(z, q), congruence(x, q.transpose())) - r) < 1e-10 * r);
  }
  CHECK_THROWS_AS(srub_ratio(z, SymMatrix::zero(8)), DomainError);
}

TEST_CASE("random_rank_r_symmetric") {
  Rng rng(3);
  for (Index r = 1; r <= 5; ++r) {
    const SymMatrix x = random_rank_r_symmetric(9, r, rng);
    CHECK(x.frobenius_norm() == doctest::Approx(1.0));
    const auto e = eigh(x);
    Index nonzero = 0;
    for (Index i = 0; i < 9; ++i) nonzero += std::abs(e.values[i]) > 1e-10 ? 1 : 0;
    CHECK(nonzero == r);
  }
  CHECK_THROWS_AS(random_rank_r_symmetric(4, 0, rng), DomainError);
  CHECK_THROWS_AS(random_rank_r_symmetric(4, 5, rng), DomainError);
}

TEST_CASE("srub_estimate") {
  const auto z = sample_ensemble(10, 50, 4);
  const auto a = srub_estimate(z, 2, 30, 9);
  CHECK(a.ratios.size() == 30);
  CHECK(a.c1_hat <= a.c2_hat);
  CHECK(a.c1_hat >= 0);
  CHECK(srub_estimate(z, 2, 30, 9).ratios == a.ratios);

  Eigen::MatrixXd v(3, 2);
  v.col(0) = Eigen::Vector3d(1, 2, 2) / 3.0;
  v.col(1) = v.col(0);
  const auto same = srub_estimate(SensingEnsemble(v, 0, Distribution::UnitSphere), 1, 20, 1);
  CHECK(same.c1_hat == 0.0);
  CHECK(same.c2_hat == 0.0);

  const auto big = srub_estimate(sample_ensemble(30, 1200, 5), 1, 200, 6);
  CHECK(big.c1_hat > 0);
  CHECK(big.c2_hat / big.c1_hat < 10);

  CHECK_THROWS_AS(srub_estimate(z, 11, 3, 1), DomainError);
  CHECK_THROWS_AS(srub_estimate(z, 1, 0, 1), DomainError);
}

TEST_CASE("sigma_condition_check") {
  const Index n = 5;
  const SensingEnsemble basis(std::sqrt(double(n)) * Eigen::MatrixXd::Identity(n, n), 0, Distribution::Gaussian);
  const auto id = sigma_condition_check(build_transform(basis));
  CHECK(id.ratio == doctest::Approx(1.0));
  CHECK(id.pass_ratio);
  CHECK(id.pass_min);

  Eigen::MatrixXd v(2, 2);
  v << 2, 0, 0, std::sqrt(2.0);
  const auto skew = sigma_condition_check(build_transform(SensingEnsemble(v, 0, Distribution::Gaussian)));
  CHECK(skew.ratio == doctest::Approx(2.0));
  CHECK_FALSE(skew.pass_ratio);

  // Unit-sphere Σ concentrates at I/n; the check is relative to that level.
  const auto dense = sigma_condition_check(build_transform(sample_ensemble(10, 20000, 7)));
  CHECK(dense.scale == doctest::Approx(0.1));
  CHECK(dense.pass_ratio);
  CHECK(dense.pass_min);
}

TEST_CASE("trace flatness holds on the transformed feasible set") {
  Rng rng(8);
  SUBCASE("noiseless feasible points") {
    for (int t = 0; t < 10; ++t) {
      const auto z = sample_ensemble(6, 30, 20 + t);
      const auto ctx = build_transform(z);
      const SymMatrix x = random_psd(6, 2, rng);
      const Eigen::VectorXd b = apply(z, x);
      const auto rep = trace_flatness_check(g_forward(ctx, x), b, 0.0, 30);
      CHECK(rep.pass);
      CHECK(std::abs(rep.trace - b.sum() / 30) < 1e-8);
    }
  }
  SUBCASE("whole affine slice, through null-space directions") {
    const auto z = sample_ensemble(3, 4, 1);
    const auto ctx = build_transform(z);
    const SymMatrix x0 = SymMatrix::identity(3) + random_psd(3, 1, rng) * 0.1;
    const Eigen::VectorXd b = apply(z, x0);
    const auto ker = null_space(z);
    REQUIRE(ker.size() == 2);
    for (const auto& nvec : ker) {
      CHECK(apply(z, nvec).norm() < 1e-12);
      const SymMatrix x = x0 + nvec * (0.3 / nvec.frobenius_norm());
      REQUIRE(min_eigenvalue(x) > 0);
      CHECK(trace_flatness_check(g_forward(ctx, x), b, 0.0, 4).pass);
    }
  }
  SUBCASE("empty band at b = 0") {
    const auto rep = trace_flatness_check(SymMatrix::zero(3), Eigen::VectorXd::Zero(5), 0.0, 5);
    CHECK(rep.lo == 0.0);
    CHECK(rep.hi == 0.0);
    CHECK(rep.pass);
    CHECK_FALSE(trace_flatness_check(SymMatrix::identity(3), Eigen::VectorXd::Zero(5), 0.0, 5).pass);
  }
  SUBCASE("band width is exactly 2·budget/m") {
    for (int t = 0; t < 10; ++t) {
      const Eigen::VectorXd b = rng.normal_vector(7);
      const double budget = rng.uniform(0, 3);
      const auto rep = trace_flatness_check(SymMatrix::identity(2), b, budget, 7);
      CHECK(rep.hi - rep.lo == doctest::Approx(2 * budget / 7).epsilon(1e-12));
    }
  }
}

TEST_CASE("error_bound_rhs") {
  CHECK(error_bound_rhs({}) == 0.0);
  CHECK(error_bound_rhs({1, 1, 4, 2, 0, 10}) == doctest::Approx(1.0));
  CHECK(error_bound_rhs({1, 2, 1, 0, 3, 6}) == doctest::Approx(1.0));

  // Tail computed from the spectrum itself, independent of the closed form.
  const Index n = 400;
  const SymMatrix x0 = decaying_spectrum_matrix(n);
  auto rhs = [&](Index r) { return error_bound_rhs({1, 1, double(r), tail_nuclear_norm(x0, n - r), 0, 1}); };
  for (Index r : {2, 4, 8}) {
    const double ratio = rhs(r) / rhs(2 * r);
    CHECK(ratio >= 2.8);
    CHECK(ratio <= 5.7);
  }

  BoundInputs base{1, 1, 3, 0.5, 0.2, 50};
  double prev = error_bound_rhs(base);
  for (int k = 1; k < 5; ++k) {
    BoundInputs in = base;
    in.tail_norm += 0.1 * k;
    in.noise_l1 += 0.05 * k;
    const double cur = error_bound_rhs(in);
    CHECK(cur >= prev);
    prev = cur;
  }
  prev = rhs(1);
  for (Index r = 2; r < 40; ++r) {
    CHECK(rhs(r) <= prev);
    prev = rhs(r);
  }
  CHECK_THROWS_AS(error_bound_rhs({1, 1, 0.5, 0, 0, 1}), DomainError);
  CHECK_THROWS_AS(error_bound_rhs({1, 1, 1, -1, 0, 1}), DomainError);
}

TEST_CASE("decaying spectrum") {
  const SymMatrix x = decaying_spectrum_matrix(30);
  CHECK(x(0, 0) == doctest::Approx(0.646446609406726).epsilon(1e-14));
  CHECK(nuclear_norm(x) == doctest::Approx(1 - std::pow(31.0, -1.5)).epsilon(1e-13));
  for (Index r : {0, 1, 5, 29}) {
    CHECK(tail_nuclear_norm(x, 30 - r) == doctest::Approx(decaying_spectrum_tail(30, r)).epsilon(1e-12));
  }
  CHECK(tail_nuclear_norm(decaying_spectrum_matrix(1000), 997) == doctest::Approx(std::pow(4.0, -1.5)).epsilon(0.01));

  const Eigen::VectorXd v = decaying_spectrum_values(10000);
  CHECK(v.minCoeff() > 0);
  for (Index i = 1; i < v.size(); ++i) CHECK_MESSAGE(v[i] < v[i - 1], "index " << i);
  CHECK_THROWS_AS(decaying_spectrum_matrix(0), DomainError);
}

TEST_CASE("effective_rank") {
  CHECK(effective_rank(200, 20) == 10);
  CHECK(effective_rank(200, 20, 4.0) == 2);
  CHECK(effective_rank(10, 20) == 1);
  CHECK(effective_rank(10000, 20) == 20);
  CHECK_THROWS_AS(effective_rank(10, 20, 0.0), DomainError);
}

TEST_CASE("recovery_error") {
  Rng rng(2);
  const SymMatrix x0 = random_sym(5, rng);
  CHECK(recovery_error(x0, x0) == 0.0);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(5);
  d.head(2) << 3, 4;
  CHECK(recovery_error(x0 + SymMatrix::diagonal(d), x0) == doctest::Approx(5.0).epsilon(1e-14));
  for (int t = 0; t < 5; ++t) {
    const SymMatrix a = random_sym(4, rng), b = random_sym(4, rng);
    double s = 0;
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    CHECK(recovery_error(a, b) == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(recovery_error(x0, SymMatrix::identity(4)), DomainError);
}
