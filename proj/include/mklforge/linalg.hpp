#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "mklforge/errors.hpp"

namespace mklforge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense symmetric matrix. Both triangles are stored and kept bitwise
// identical, so callers never see asymmetry from rounding.
class SymMatrix {
 public:
  explicit SymMatrix(Eigen::Index dim) : m_(check_dim(dim), dim) { m_.setZero(); }

  static SymMatrix zero(Eigen::Index dim) { return SymMatrix(dim); }

  static SymMatrix identity(Eigen::Index dim) {
    SymMatrix s(dim);
    s.m_.setIdentity();
    return s;
  }

  // Accepts any square matrix and averages the two triangles. The average
  // is computed once per unordered pair, so the result is exactly symmetric.
  static SymMatrix symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("SymMatrix::symmetrized: matrix must be square");
    SymMatrix s(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      s.m_(i, i) = m(i, i);
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        s.m_(i, j) = v;
        s.m_(j, i) = v;
      }
    }
    return s;
  }

  // Takes ownership of a matrix that is already exactly symmetric.
  static SymMatrix from_symmetric(Matrix m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("SymMatrix::from_symmetric: matrix must be square");
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j)
        if (m(i, j) != m(j, i)) throw InvalidArgument("SymMatrix::from_symmetric: matrix is not exactly symmetric");
    SymMatrix s(m.rows());
    s.m_ = std::move(m);
    return s;
  }

  Eigen::Index dim() const { return m_.rows(); }

  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  void set(Eigen::Index i, Eigen::Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Matrix& dense() const { return m_; }

 private:
  static Eigen::Index check_dim(Eigen::Index dim) {
    if (dim < 1) throw InvalidArgument("SymMatrix: dimension must be at least 1");
    return dim;
  }

  Matrix m_;
};

// Solves (A + shift*I) x = b for symmetric positive semidefinite A and
// shift > 0. Cholesky first, pivoted LDLT as fallback, plus iterative
// refinement until the residual is at most 1e-10 * ||b||.
inline Vector spd_solve(const SymMatrix& a, double shift, const Vector& b) {
  if (b.size() != a.dim()) throw DimensionMismatch("spd_solve: rhs length does not match matrix dimension");
  if (!(shift > 0.0) || !std::isfinite(shift)) throw InvalidArgument("spd_solve: shift must be positive and finite");

  Matrix sys = a.dense();
  sys.diagonal().array() += shift;

  Eigen::LLT<Matrix> llt(sys);
  Eigen::LDLT<Matrix> ldlt;
  const bool use_llt = (llt.info() == Eigen::Success);
  if (!use_llt) {
    ldlt.compute(sys);
    if (ldlt.info() != Eigen::Success) throw NumericalFailure("spd_solve: factorization failed");
  }
  const auto apply = [&](const Vector& rhs) { return use_llt ? Vector(llt.solve(rhs)) : Vector(ldlt.solve(rhs)); };

  Vector x = apply(b);
  const double bnorm = b.norm();
  const double tol = 1e-10 * bnorm;
  double rnorm = (b - sys * x).norm();
  for (int pass = 0; pass < 4 && rnorm > tol; ++pass) {
    x += apply(b - sys * x);
    rnorm = (b - sys * x).norm();
  }
  if (rnorm > tol) throw NumericalFailure("spd_solve: residual tolerance not met");
  return x;
}

// Entrywise (Schur) product.
inline SymMatrix hadamard(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("hadamard: dimensions differ");
  return SymMatrix::from_symmetric(a.dense().cwiseProduct(b.dense()));
}

// x' A x evaluated as the explicit double sum.
inline double quadratic_form(const Vector& x, const SymMatrix& a) {
  if (x.size() != a.dim()) throw DimensionMismatch("quadratic_form: vector length does not match matrix dimension");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < a.dim(); ++j) row += a(i, j) * x(j);
    total += x(i) * row;
  }
  return total;
}

struct EigRange {
  double min = 0.0;
  double max = 0.0;
};

// Smallest and largest eigenvalue of a symmetric matrix.
inline EigRange extremal_eigs(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.dense(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("extremal_eigs: eigensolver did not converge");
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

// Spectral norm (largest absolute eigenvalue).
inline double spectral_norm(const SymMatrix& a) {
  const EigRange r = extremal_eigs(a);
  return std::max(std::abs(r.min), std::abs(r.max));
}

}  // namespace mklforge
