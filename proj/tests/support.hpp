#pragma once

#include <cmath>
#include <functional>

#include "isolab/linalg.hpp"
#include "isolab/rng.hpp"

namespace isolab::test {

inline Vector normal_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline Matrix normal_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  }
  return m;
}

inline SymMatrix random_symmetric(Eigen::Index n, Rng& rng) {
  return SymMatrix(normal_matrix(n, n, rng));
}

/// A A^T / n + shift * I.
inline SymMatrix random_psd(Eigen::Index n, Rng& rng, double shift = 0.1) {
  const Matrix a = normal_matrix(n, n, rng);
  return SymMatrix(a * a.transpose() / static_cast<double>(n) +
                   shift * Matrix::Identity(n, n));
}

/// Haar-ish orthogonal matrix from the QR factor of a Gaussian matrix.
inline Matrix random_rotation(Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(normal_matrix(n, n, rng));
  return qr.householderQ() * Matrix::Identity(n, n);
}

/// Central differences of f around x, step h per coordinate.
inline Vector central_difference(const std::function<double(const Vector&)>& f,
                                 const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector p = x, m = x;
    p(i) += h;
    m(i) -= h;
    g(i) = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|b|, floor), measured in the Euclidean norm.
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace isolab::test
