#pragma once

#include <optional>
#include <string_view>
#include <utility>

#include "isolab/data.hpp"
#include "isolab/linalg.hpp"
#include "isolab/losses.hpp"
#include "isolab/rng.hpp"

namespace isolab {

enum class Activation { Linear, Relu };
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

/// Single-layer encoder z = act(W x), W of shape M x N.
struct EncoderParams {
  Matrix weights;
  Activation activation = Activation::Linear;

  Eigen::Index output_dim() const noexcept { return weights.rows(); }
  Eigen::Index input_dim() const noexcept { return weights.cols(); }

  Vector forward(const Vector& x) const;
  /// Column-wise forward pass over an N x B batch.
  Matrix forward_batch(const Matrix& x) const;

  /// i.i.d. normal entries with standard deviation init_scale / sqrt(N).
  static EncoderParams random(Eigen::Index output_dim, Eigen::Index input_dim,
                              double init_scale, Activation activation,
                              Rng& rng);
};

enum class PredictorMode { ClosedForm, Trainable, Identity };
std::string_view to_string(PredictorMode m);
PredictorMode parse_predictor_mode(std::string_view text);

struct PredictorState {
  PredictorMode mode = PredictorMode::ClosedForm;
  double alpha = 0.5;
  double corr_tau = 0.5;
  /// Running estimate of C_z (closed_form only). Seeded with the first batch
  /// correlation when `has_estimate` is false.
  SymMatrix corr_estimate;
  bool has_estimate = false;
  /// W_P. Symmetric for closed_form and identity; general for trainable.
  Matrix current;
  /// W_P^{1/2}, kept alongside `current` in closed_form mode.
  Matrix current_sqrt;

  static PredictorState closed_form(Eigen::Index dim, double alpha, double corr_tau);
  static PredictorState identity(Eigen::Index dim);
  /// Identity plus N(0, noise_std^2) entries.
  static PredictorState trainable(Eigen::Index dim, double noise_std, Rng& rng);
};

struct SiameseState {
  EncoderParams online;
  std::optional<EncoderParams> target;  // present iff ema_tau is
  PredictorState predictor;
  std::optional<double> ema_tau;
  double weight_decay = 0.0;
  double learning_rate = 0.1;

  void validate(const LossSpec& loss) const;
};

struct StepMetrics {
  double loss = 0.0;
  double grad_norm = 0.0;
  /// Cosine orderings skipped because a representation was exactly zero.
  long long skipped_orderings = 0;
  /// Sorted (descending) eigenvalues of the batch correlation of the online
  /// representations, before the update.
  Vector corr_eigenvalues;
  /// Eigenvalues of the (symmetric part of the) predictor used this step.
  Vector predictor_eigenvalues;
  Vector alignment;
  /// Batch mean of |zhat_m| / |zhat| in the sorted eigenbasis of C_z.
  Vector chi;
};

/// Refreshes a closed-form predictor from a batch of representations
/// (columns of `z_batch`): corr_estimate <- ema(corr_estimate, C_batch),
/// current <- corr_estimate^alpha.
PredictorState refresh_predictor(const PredictorState& predictor,
                                 const Matrix& z_batch);

struct StepOutput {
  SiameseState state;
  StepMetrics metrics;
};

/// One full-batch gradient step.
///
/// Order: forward both views, refresh a closed-form predictor from the
/// online representations of both views, compute gradients with W_P held
/// constant, update the encoder (and a trainable predictor), then move the
/// EMA target. With loss.symmetrize each pair contributes the mean of both
/// orderings. When `with_metrics` is false only `loss` and `grad_norm` are
/// filled in. Representation metrics (corr eigenvalues, alignment, chi) use
/// the online outputs of both views, or of `metric_inputs` (N x B) when given.
StepOutput train_step(const SiameseState& state, const AugmentedBatch& batch,
                      const LossSpec& loss, bool with_metrics = true,
                      const Matrix* metric_inputs = nullptr);

/// Mean encoder gradient dL/dW of the batch loss, with the target branch and
/// predictor treated as constants. Exposed for gradient checking.
Matrix encoder_gradient(const SiameseState& state, const AugmentedBatch& batch,
                        const LossSpec& loss);

/// Mean batch loss for online weights `w`, with every stop-grad branch frozen
/// at the representations produced by `frozen_weights` (and by the target
/// encoder when present). Differentiating this in `w` at w == frozen_weights
/// reproduces encoder_gradient.
double frozen_batch_loss(const SiameseState& state, const Matrix& w,
                         const Matrix& frozen_weights,
                         const AugmentedBatch& batch, const LossSpec& loss);

}  // namespace isolab
