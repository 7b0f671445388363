#include "feasrop/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "feasrop/errors.hpp"

namespace feasrop {

SymMatrix::SymMatrix(Index n) {
  if (n < 1) throw DomainError("SymMatrix: dimension must be at least 1");
  a_ = Eigen::MatrixXd::Zero(n, n);
}

SymMatrix SymMatrix::from_dense(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    std::ostringstream os;
    os << "SymMatrix: expected a nonempty square matrix, got " << a.rows() << "x" << a.cols();
    throw DomainError(os.str());
  }
  SymMatrix s;
  s.a_ = 0.5 * (a + a.transpose());
  return s;
}

SymMatrix SymMatrix::identity(Index n) {
  SymMatrix s(n);
  s.a_.diagonal().setOnes();
  return s;
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& d) {
  SymMatrix s(d.size());
  s.a_.diagonal() = d;
  return s;
}

SymMatrix SymMatrix::outer(const Eigen::VectorXd& v) {
  SymMatrix s(v.size());
  s.a_.noalias() = v * v.transpose();
  return s;
}

double SymMatrix::inner(const SymMatrix& other) const {
  if (other.dim() != dim()) throw DomainError("SymMatrix::inner: dimension mismatch");
  return a_.cwiseProduct(other.a_).sum();
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  if (o.dim() != dim()) throw DomainError("SymMatrix: dimension mismatch in +");
  a_ += o.a_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  if (o.dim() != dim()) throw DomainError("SymMatrix: dimension mismatch in -");
  a_ -= o.a_;
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  a_ *= s;
  return *this;
}

SymMatrix congruence(const SymMatrix& a, const Eigen::MatrixXd& b) {
  if (b.rows() != a.dim() || b.cols() != a.dim()) throw DomainError("congruence: dimension mismatch");
  Eigen::MatrixXd ab = a.dense() * b;
  return SymMatrix::from_dense(b.transpose() * ab);
}

SymMatrix spectral_compose(const Eigen::MatrixXd& u, const Eigen::VectorXd& w) {
  if (u.cols() != w.size()) throw DomainError("spectral_compose: column/weight count mismatch");
  if (u.cols() == 0) return SymMatrix(u.rows());
  Eigen::MatrixXd uw = u * w.asDiagonal();
  return SymMatrix::from_dense(uw * u.transpose());
}

EigenDecomposition eigh(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense());
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigh: eigensolver did not converge (n=" << a.dim() << ", |A|_F=" << a.frobenius_norm()
       << ", finite=" << (a.dense().allFinite() ? "yes" : "no") << ")";
    throw NumericalError(os.str());
  }
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

SymMatrix psd_project(const EigenDecomposition& eig) {
  Index k = 0;
  while (k < eig.values.size() && eig.values(k) > 0.0) ++k;
  return spectral_compose(eig.vectors.leftCols(k), eig.values.head(k));
}

SymMatrix psd_project(const SymMatrix& a) { return psd_project(eigh(a)); }

double tail_nuclear_norm(const SymMatrix& a, Index p) {
  if (p < 0 || p > a.dim()) throw DomainError("tail_nuclear_norm: p must lie in [0, n]");
  if (p == 0) return 0.0;
  Eigen::VectorXd s = eigh(a).values.cwiseAbs();
  std::sort(s.begin(), s.end());
  return s.head(p).sum();
}

double nuclear_norm(const SymMatrix& a) { return eigh(a).values.cwiseAbs().sum(); }

SymMatrix best_rank_r_psd(const SymMatrix& a, Index r) {
  if (r < 1 || r > a.dim()) throw DomainError("best_rank_r_psd: r must lie in [1, n]");
  EigenDecomposition eig = eigh(a);
  Index k = 0;
  while (k < r && eig.values(k) > 0.0) ++k;
  return spectral_compose(eig.vectors.leftCols(k), eig.values.head(k));
}

SymMatrix sym_sqrt(const SymMatrix& a) {
  EigenDecomposition eig = eigh(a);
  const double norm2 = eig.values.cwiseAbs().maxCoeff();
  const double lmin = eig.values(eig.values.size() - 1);
  if (lmin < -kEigenClampRel * norm2) {
    std::ostringstream os;
    os << "sym_sqrt: matrix is not PSD (min eigenvalue " << lmin << ", |A|_2 " << norm2 << ")";
    throw NotPsdError(os.str());
  }
  Eigen::VectorXd roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return spectral_compose(eig.vectors, roots);
}

std::pair<double, Eigen::VectorXd> top_eigenvector(const SymMatrix& a) {
  EigenDecomposition eig = eigh(a);
  Eigen::VectorXd v = eig.vectors.col(0);
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  return {eig.values(0), v};
}

double min_eigenvalue(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("min_eigenvalue: eigensolver did not converge");
  return solver.eigenvalues()(0);
}

double spectral_norm(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_norm: eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace feasrop
