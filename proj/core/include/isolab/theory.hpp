#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isolab/linalg.hpp"
#include "isolab/losses.hpp"
#include "isolab/network.hpp"

namespace isolab {

enum class StateKind { ZHat, Eigenvalues };

struct TheoryTrajectory {
  std::vector<double> times;   // strictly increasing
  std::vector<Vector> states;  // one per time, constant dimension
  StateKind kind = StateKind::Eigenvalues;
  double dt = 0.0;
  std::string config;
  bool diverged = false;
};

using OdeRhs = std::function<Vector(const Vector&)>;

inline constexpr double kBlowUpThreshold = 1e12;

/// Per-mode representational drift for the euclidean loss:
/// eta * lambda_m * (zhat2_m - lambda_m * zhat1_m).
Vector euc_exact_rhs(const Vector& zhat1, const Vector& zhat2,
                     const Vector& eigenvalues, double eta);

/// Augmentation-averaged form: eta * lambda_m * (1 - lambda_m) * zhat_m.
Vector euc_expected_rhs(const Vector& zhat, const Vector& eigenvalues, double eta);

/// Coupled drift for the cosine loss:
///   eta * lambda_m / (|D zhat1|^3 |zhat2|)
///     * sum_{k != m} lambda_k (lambda_k zhat1_k^2 zhat2_m - lambda_m zhat1_m zhat1_k zhat2_k)
Vector cos_exact_rhs(const Vector& zhat1, const Vector& zhat2,
                     const Vector& eigenvalues, double eta);

/// Eigenvalue-level right-hand side d(lambda)/dt for a loss configuration.
/// cosine/no_stop_grad and cosine/no_predictor have no closed form and throw
/// ConfigError. euclidean/iso_alternative shares the euclidean/iso row.
Vector table1_eigen_rhs(const LossSpec& loss, const Vector& eigenvalues, double rate);
bool has_table1_rhs(const LossSpec& loss) noexcept;

/// Classical fixed-step RK4. Stops early with `diverged` set when a state
/// entry becomes non-finite or exceeds kBlowUpThreshold in magnitude. Every
/// `record_every`-th state is kept, plus the last one.
TheoryTrajectory integrate(const OdeRhs& rhs, const Vector& x0, double dt,
                           long long steps, long long record_every = 1,
                           StateKind kind = StateKind::Eigenvalues,
                           std::string config = {});

/// Empirical NTK block J_i J_j^T of the rotated output U^T W x for a linear
/// encoder, assembled from explicit M x (M N) Jacobians.
Matrix ntk_block(const EncoderParams& enc, const Vector& x_i, const Vector& x_j,
                 const Matrix& rotation);

}  // namespace isolab
