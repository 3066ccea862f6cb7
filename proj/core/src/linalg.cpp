#include "isolab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "isolab/errors.hpp"

namespace isolab {

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("SymMatrix requires a square matrix, got " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  if (a.rows() < 1) throw DimensionError("SymMatrix requires dim >= 1");
  if (!a.allFinite()) throw NumericalError("SymMatrix entries must be finite");
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::zero(Eigen::Index dim) {
  return SymMatrix(Matrix::Zero(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Vector& d) {
  return SymMatrix(Matrix(d.asDiagonal()));
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) sum += 2.0 * a(i, j) * a(i, j);
  }
  return std::sqrt(sum);
}

// Zeroes a(p, q) with a plane rotation, updating a and the accumulated basis.
void rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

SymEigDecomp sym_eig(const SymMatrix& sym) {
  Matrix a = sym.matrix();
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double target = kJacobiRelTol * a.norm();

  const auto sweep_once = [&] {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) != 0.0) rotate(a, v, p, q);
      }
    }
  };

  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > target) {
    if (sweep == kJacobiMaxSweeps) {
      std::ostringstream msg;
      msg << "sym_eig: no convergence after " << kJacobiMaxSweeps
          << " sweeps, off-diagonal norm " << off;
      throw ConvergenceError(msg.str(), off);
    }
    sweep_once();
    ++sweep;
    off = off_diagonal_norm(a);
  }
  // Quadratic convergence: one more sweep takes the remainder to roundoff.
  if (sweep > 0) sweep_once();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEigDecomp out{Matrix(n, n), Vector(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    out.basis.col(k) = v.col(src);
  }
  return out;
}

SymMatrix matrix_power(const SymEigDecomp& eig, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("matrix_power: alpha must be a finite non-negative real");
  }
  const Eigen::Index n = eig.eigenvalues.size();
  const double scale = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
  Vector powered(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = eig.eigenvalues(i);
    if (s < -kNegativeClamp * scale) {
      std::ostringstream msg;
      msg << "matrix_power: eigenvalue " << s << " (index " << i
          << ") is materially negative";
      throw NegativeEigenvalueError(msg.str(), s);
    }
    powered(i) = std::pow(std::max(s, 0.0), alpha);
  }
  return SymMatrix(eig.basis * powered.asDiagonal() * eig.basis.transpose());
}

SymMatrix matrix_power(const SymMatrix& a, double alpha) {
  return matrix_power(sym_eig(a), alpha);
}

SymMatrix ema_update(const SymMatrix& estimate, const SymMatrix& batch_corr,
                     double tau) {
  if (estimate.dim() != batch_corr.dim()) {
    throw DimensionError("ema_update: dimension mismatch " +
                         std::to_string(estimate.dim()) + " vs " +
                         std::to_string(batch_corr.dim()));
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ConfigError("ema_update: tau must lie in [0, 1]");
  }
  return SymMatrix(tau * estimate.matrix() + (1.0 - tau) * batch_corr.matrix());
}

SymMatrix batch_correlation(const Matrix& z_batch) {
  if (z_batch.cols() == 0) throw ConfigError("batch_correlation: empty batch");
  return SymMatrix(z_batch * z_batch.transpose() /
                   static_cast<double>(z_batch.cols()));
}

SymMatrix batch_correlation(std::span<const Vector> z_batch) {
  if (z_batch.empty()) throw ConfigError("batch_correlation: empty batch");
  const Eigen::Index m = z_batch.front().size();
  Matrix stacked(m, static_cast<Eigen::Index>(z_batch.size()));
  for (std::size_t i = 0; i < z_batch.size(); ++i) {
    if (z_batch[i].size() != m) {
      throw DimensionError("batch_correlation: non-uniform vector dimension");
    }
    stacked.col(static_cast<Eigen::Index>(i)) = z_batch[i];
  }
  return batch_correlation(stacked);
}

}  // namespace isolab
