#pragma once

#include <utility>

#include <Eigen/Dense>

namespace feasrop {

using Index = Eigen::Index;

/// Dense real symmetric matrix. Symmetry is enforced at construction by
/// averaging with the transpose, so every stored instance is exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Index n);

  /// Throws DomainError for non-square or empty input.
  static SymMatrix from_dense(const Eigen::MatrixXd& a);
  static SymMatrix zero(Index n) { return SymMatrix(n); }
  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Eigen::VectorXd& d);
  /// v vᵀ
  static SymMatrix outer(const Eigen::VectorXd& v);

  Index dim() const { return a_.rows(); }
  const Eigen::MatrixXd& dense() const { return a_; }
  double operator()(Index i, Index j) const { return a_(i, j); }

  double trace() const { return a_.trace(); }
  double frobenius_norm() const { return a_.norm(); }
  double squared_norm() const { return a_.squaredNorm(); }
  /// Frobenius inner product.
  double inner(const SymMatrix& other) const;

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  bool operator==(const SymMatrix& o) const { return a_.rows() == o.a_.rows() && a_ == o.a_; }

 private:
  Eigen::MatrixXd a_;
};

/// Bᵀ A B for square B of matching size.
SymMatrix congruence(const SymMatrix& a, const Eigen::MatrixXd& b);

/// U diag(w) Uᵀ for the columns of U.
SymMatrix spectral_compose(const Eigen::MatrixXd& u, const Eigen::VectorXd& w);

struct EigenDecomposition {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns orthonormal, aligned with values
};

/// Relative threshold below which eigenvalues count as zero: 1e-10 · ‖A‖₂.
inline constexpr double kEigenClampRel = 1e-10;

EigenDecomposition eigh(const SymMatrix& a);

/// Frobenius-nearest PSD matrix.
SymMatrix psd_project(const SymMatrix& a);
SymMatrix psd_project(const EigenDecomposition& eig);

/// Sum of the p smallest singular values.
double tail_nuclear_norm(const SymMatrix& a, Index p);
double nuclear_norm(const SymMatrix& a);

/// Top-r eigenpairs with eigenvalues clamped at zero.
SymMatrix best_rank_r_psd(const SymMatrix& a, Index r);

/// Symmetric square root. Throws NotPsdError below -1e-10·‖A‖₂.
SymMatrix sym_sqrt(const SymMatrix& a);

/// Largest eigenpair; eigenvector sign fixed so the first nonzero coordinate is positive.
std::pair<double, Eigen::VectorXd> top_eigenvector(const SymMatrix& a);

double min_eigenvalue(const SymMatrix& a);
double spectral_norm(const SymMatrix& a);

}  // namespace feasrop
