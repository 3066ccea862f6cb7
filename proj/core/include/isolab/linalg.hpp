#pragma once

#include <Eigen/Dense>
#include <span>

namespace isolab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric matrix. Construction symmetrizes by averaging with the
/// transpose, so entries(i, j) == entries(j, i) holds exactly afterwards.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& a);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix zero(Eigen::Index dim);
  static SymMatrix diagonal(const Vector& d);

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

/// Orthogonal eigenbasis (columns of `basis`) and eigenvalues sorted in
/// non-increasing order.
struct SymEigDecomp {
  Matrix basis;
  Vector eigenvalues;
};

// Cyclic Jacobi settings.
inline constexpr double kJacobiRelTol = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;
// Eigenvalues in [-kNegativeClamp * scale, 0] are treated as roundoff.
inline constexpr double kNegativeClamp = 1e-10;

/// Eigendecomposition by cyclic Jacobi rotations with a fixed sweep order.
/// Ties in the sorted eigenvalues keep their original diagonal order.
/// Throws ConvergenceError after kJacobiMaxSweeps sweeps.
SymEigDecomp sym_eig(const SymMatrix& a);

/// U D^alpha U^T. Eigenvalues below -kNegativeClamp * max(1, max|eig|) throw
/// NegativeEigenvalueError; the remaining negatives are clamped to zero.
SymMatrix matrix_power(const SymMatrix& a, double alpha);
SymMatrix matrix_power(const SymEigDecomp& eig, double alpha);

/// tau * estimate + (1 - tau) * batch_corr.
SymMatrix ema_update(const SymMatrix& estimate, const SymMatrix& batch_corr,
                     double tau);

/// (1/B) sum_i z_i z_i^T over the columns of `z_batch` (M x B).
SymMatrix batch_correlation(const Matrix& z_batch);
SymMatrix batch_correlation(std::span<const Vector> z_batch);

}  // namespace isolab
