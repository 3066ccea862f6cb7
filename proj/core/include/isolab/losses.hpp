#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "isolab/linalg.hpp"

namespace isolab {

enum class Metric { Euclidean, Cosine };
enum class Variant { Standard, NoStopGrad, NoPredictor, Iso, IsoAlternative };

std::string_view to_string(Metric m);
std::string_view to_string(Variant v);
Metric parse_metric(std::string_view text);
Variant parse_variant(std::string_view text);

/// One of the asymmetric loss configurations (metric x variant).
struct LossSpec {
  Metric metric = Metric::Euclidean;
  Variant variant = Variant::Standard;
  bool symmetrize = false;

  void validate() const;
  /// "metric/variant", e.g. "cosine/iso".
  std::string name() const;
  /// Parses "metric/variant"; symmetrize stays false.
  static LossSpec parse(std::string_view text);

  bool stops_gradient() const noexcept { return variant != Variant::NoStopGrad; }
  bool uses_predictor() const noexcept { return variant != Variant::NoPredictor; }
  /// True when the prediction W_P z1 is differentiated (i.e. a trainable
  /// predictor receives a gradient).
  bool differentiates_prediction() const noexcept {
    return variant == Variant::Standard || variant == Variant::NoStopGrad;
  }

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

struct LossGrads {
  double value = 0.0;
  Vector grad_z1;
  /// Zero unless gradients reach z2 (no_stop_grad, or the swapped ordering
  /// when symmetrized).
  Vector grad_z2;
  /// dL/d(W_P z1); empty when the prediction sits inside a stop-grad, when
  /// there is no predictor, or when symmetrized.
  Vector grad_prediction;
};

inline constexpr double kCosineNormFloor = 1e-12;

/// Loss value and stop-grad-aware gradients for one pair of representations.
///
/// `predictor` is W_P (ignored for no_predictor). cosine/iso also needs
/// W_P^{1/2}; pass it via `predictor_sqrt` to reuse a per-step computation,
/// otherwise it is computed here. With `symmetrize` the value is the mean of
/// both orderings and each ordering's gradient lands in the slot of the
/// vector it was taken with respect to.
LossGrads eval_loss_and_grads(const LossSpec& spec, const Vector& z1,
                              const Vector& z2, const Matrix& predictor,
                              const Matrix* predictor_sqrt = nullptr);

/// The loss with every stop-grad subexpression evaluated at the frozen
/// arguments and everything else at the live ones. Its partial derivatives
/// in the live arguments, taken at live == frozen, are exactly the gradients
/// returned by eval_loss_and_grads.
double eval_surrogate(const LossSpec& spec, const Vector& live1,
                      const Vector& live2, const Vector& frozen1,
                      const Vector& frozen2, const Matrix& predictor,
                      const Matrix* predictor_sqrt = nullptr);

/// Closed-form standard loss in the predictor eigenbasis,
/// zhat = U^T z and W_P = U diag(eigenvalues) U^T.
double eval_loss_eigenbasis(const LossSpec& spec, const Vector& zhat1,
                            const Vector& zhat2, const Vector& eigenvalues);

}  // namespace isolab
