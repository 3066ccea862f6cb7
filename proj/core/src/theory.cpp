#include "isolab/theory.hpp"

#include <cmath>

#include "isolab/errors.hpp"

namespace isolab {

namespace {

void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": dimension mismatch");
}

}  // namespace

Vector euc_exact_rhs(const Vector& zhat1, const Vector& zhat2,
                     const Vector& eigenvalues, double eta) {
  require_same_size(zhat1, eigenvalues, "euc_exact_rhs");
  require_same_size(zhat2, eigenvalues, "euc_exact_rhs");
  return eta * eigenvalues.cwiseProduct(zhat2 - eigenvalues.cwiseProduct(zhat1));
}

Vector euc_expected_rhs(const Vector& zhat, const Vector& eigenvalues, double eta) {
  require_same_size(zhat, eigenvalues, "euc_expected_rhs");
  const Vector one_minus = Vector::Ones(eigenvalues.size()) - eigenvalues;
  return eta * eigenvalues.cwiseProduct(one_minus).cwiseProduct(zhat);
}

Vector cos_exact_rhs(const Vector& zhat1, const Vector& zhat2,
                     const Vector& eigenvalues, double eta) {
  require_same_size(zhat1, eigenvalues, "cos_exact_rhs");
  require_same_size(zhat2, eigenvalues, "cos_exact_rhs");
  const double n1 = eigenvalues.cwiseProduct(zhat1).norm();
  const double n2 = zhat2.norm();
  if (!(n1 > kCosineNormFloor)) throw NormUnderflowError("D zhat1", n1);
  if (!(n2 > kCosineNormFloor)) throw NormUnderflowError("zhat2", n2);
  const Eigen::Index m_dim = eigenvalues.size();
  const double scale = eta / (n1 * n1 * n1 * n2);
  Vector out(m_dim);
  for (Eigen::Index m = 0; m < m_dim; ++m) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m_dim; ++k) {
      if (k == m) continue;
      sum += eigenvalues(k) * (eigenvalues(k) * zhat1(k) * zhat1(k) * zhat2(m) -
                               eigenvalues(m) * zhat1(m) * zhat1(k) * zhat2(k));
    }
    out(m) = scale * eigenvalues(m) * sum;
  }
  return out;
}

bool has_table1_rhs(const LossSpec& loss) noexcept {
  return loss.metric == Metric::Euclidean || loss.variant == Variant::Standard ||
         loss.variant == Variant::Iso;
}

Vector table1_eigen_rhs(const LossSpec& loss, const Vector& eigenvalues, double rate) {
  loss.validate();
  if (!(rate > 0.0)) throw ConfigError("table1_eigen_rhs: rate must be positive");
  if (!has_table1_rhs(loss)) {
    throw ConfigError("no eigenvalue-level dynamics for " + loss.name() +
                      "; classify empirical runs instead");
  }
  const Vector& l = eigenvalues;
  const Eigen::Index n = l.size();
  const Vector one_minus = Vector::Ones(n) - l;

  if (loss.metric == Metric::Euclidean) {
    switch (loss.variant) {
      case Variant::Standard:
        return 2.0 * rate * l.cwiseProduct(l).cwiseProduct(one_minus);
      case Variant::NoStopGrad:
        return -2.0 * rate * l.cwiseProduct(one_minus).cwiseProduct(one_minus);
      case Variant::NoPredictor:
        return Vector::Zero(n);
      case Variant::Iso:
      case Variant::IsoAlternative:
        return 2.0 * rate * l.cwiseProduct(one_minus);
    }
  }

  // sum_{k != m} l_k (l_k - l_m) = sum_k l_k^2 - l_m sum_k l_k
  const double sum_sq = l.squaredNorm();
  const double sum = l.sum();
  Vector coupling(n);
  for (Eigen::Index m = 0; m < n; ++m) coupling(m) = sum_sq - l(m) * sum;
  const Vector prefactor = loss.variant == Variant::Standard ? l.cwiseProduct(l) : l;
  return 2.0 * rate * prefactor.cwiseProduct(coupling);
}

TheoryTrajectory integrate(const OdeRhs& rhs, const Vector& x0, double dt,
                           long long steps, long long record_every,
                           StateKind kind, std::string config) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integrate: dt must be positive");
  if (steps < 1) throw ConfigError("integrate: steps must be positive");
  if (record_every < 1) throw ConfigError("integrate: record_every must be positive");

  TheoryTrajectory traj;
  traj.kind = kind;
  traj.dt = dt;
  traj.config = std::move(config);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);

  auto blown_up = [](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v(i)) || std::abs(v(i)) > kBlowUpThreshold) return true;
    }
    return false;
  };
  auto checked = [&](Vector v) {
    if (v.size() != x0.size()) throw DimensionError("integrate: rhs changed the state dimension");
    return v;
  };

  Vector x = x0;
  for (long long s = 1; s <= steps; ++s) {
    const Vector k1 = checked(rhs(x));
    const Vector k2 = checked(rhs(x + 0.5 * dt * k1));
    const Vector k3 = checked(rhs(x + 0.5 * dt * k2));
    const Vector k4 = checked(rhs(x + dt * k3));
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = static_cast<double>(s) * dt;
    if (blown_up(x)) {
      traj.diverged = true;
      traj.times.push_back(t);
      traj.states.push_back(x);
      return traj;
    }
    if (s % record_every == 0 || s == steps) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  return traj;
}

Matrix ntk_block(const EncoderParams& enc, const Vector& x_i, const Vector& x_j,
                 const Matrix& rotation) {
  if (enc.activation != Activation::Linear) {
    throw ConfigError("ntk_block supports linear encoders only");
  }
  const Eigen::Index m = enc.output_dim();
  const Eigen::Index n = enc.input_dim();
  if (x_i.size() != n || x_j.size() != n) throw DimensionError("ntk_block: input dimension mismatch");
  if (rotation.rows() != m || rotation.cols() != m) {
    throw DimensionError("ntk_block: rotation must be M x M");
  }
  if (m * n > 10000) throw ConfigError("ntk_block: M*N exceeds 10^4");

  // d(U^T W x)_r / dW_ab = U_ar x_b, parameters flattened row-major.
  auto jacobian = [&](const Vector& x) {
    Matrix j(m, m * n);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) j(r, a * n + b) = rotation(a, r) * x(b);
      }
    }
    return j;
  };
  return jacobian(x_i) * jacobian(x_j).transpose();
}

}  // namespace isolab
