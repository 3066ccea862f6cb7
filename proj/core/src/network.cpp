#include "isolab/network.hpp"

#include <cmath>

#include "isolab/analysis.hpp"
#include "isolab/errors.hpp"

namespace isolab {

std::string_view to_string(Activation a) {
  return a == Activation::Linear ? "linear" : "relu";
}

Activation parse_activation(std::string_view text) {
  if (text == "linear") return Activation::Linear;
  if (text == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

std::string_view to_string(PredictorMode m) {
  switch (m) {
    case PredictorMode::ClosedForm:
      return "closed_form";
    case PredictorMode::Trainable:
      return "trainable";
    case PredictorMode::Identity:
      return "identity";
  }
  return "?";
}

PredictorMode parse_predictor_mode(std::string_view text) {
  if (text == "closed_form") return PredictorMode::ClosedForm;
  if (text == "trainable") return PredictorMode::Trainable;
  if (text == "identity") return PredictorMode::Identity;
  throw ConfigError("unknown predictor mode '" + std::string(text) + "'");
}

Vector EncoderParams::forward(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("forward: input has dimension " +
                         std::to_string(x.size()) + ", encoder expects " +
                         std::to_string(input_dim()));
  }
  Vector z = weights * x;
  if (activation == Activation::Relu) z = z.cwiseMax(0.0);
  return z;
}

Matrix EncoderParams::forward_batch(const Matrix& x) const {
  if (x.rows() != input_dim()) {
    throw DimensionError("forward_batch: input has dimension " +
                         std::to_string(x.rows()) + ", encoder expects " +
                         std::to_string(input_dim()));
  }
  Matrix z = weights * x;
  if (activation == Activation::Relu) z = z.cwiseMax(0.0);
  return z;
}

EncoderParams EncoderParams::random(Eigen::Index output_dim,
                                    Eigen::Index input_dim, double init_scale,
                                    Activation activation, Rng& rng) {
  if (output_dim < 1 || input_dim < 1) {
    throw ConfigError("encoder dimensions must be positive");
  }
  const double std_dev = init_scale / std::sqrt(static_cast<double>(input_dim));
  Matrix w(output_dim, input_dim);
  for (Eigen::Index i = 0; i < output_dim; ++i) {
    for (Eigen::Index j = 0; j < input_dim; ++j) w(i, j) = std_dev * rng.normal();
  }
  return {std::move(w), activation};
}

PredictorState PredictorState::closed_form(Eigen::Index dim, double alpha,
                                           double corr_tau) {
  if (!(alpha > 0.0)) throw ConfigError("predictor alpha must be positive");
  if (!(corr_tau >= 0.0 && corr_tau < 1.0)) {
    throw ConfigError("predictor corr_tau must lie in [0, 1)");
  }
  PredictorState p;
  p.mode = PredictorMode::ClosedForm;
  p.alpha = alpha;
  p.corr_tau = corr_tau;
  p.corr_estimate = SymMatrix::identity(dim);
  p.current = Matrix::Identity(dim, dim);
  p.current_sqrt = Matrix::Identity(dim, dim);
  return p;
}

PredictorState PredictorState::identity(Eigen::Index dim) {
  PredictorState p;
  p.mode = PredictorMode::Identity;
  p.current = Matrix::Identity(dim, dim);
  p.current_sqrt = Matrix::Identity(dim, dim);
  return p;
}

PredictorState PredictorState::trainable(Eigen::Index dim, double noise_std,
                                         Rng& rng) {
  PredictorState p;
  p.mode = PredictorMode::Trainable;
  p.current = Matrix::Identity(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) p.current(i, j) += noise_std * rng.normal();
  }
  return p;
}

void SiameseState::validate(const LossSpec& loss) const {
  loss.validate();
  if (target.has_value() != ema_tau.has_value()) {
    throw ConfigError("target network must be present iff ema_tau is set");
  }
  if (ema_tau && !(*ema_tau >= 0.0 && *ema_tau <= 1.0)) {
    throw ConfigError("ema_tau must lie in [0, 1]");
  }
  if (target && (target->weights.rows() != online.weights.rows() ||
                 target->weights.cols() != online.weights.cols())) {
    throw DimensionError("target and online encoders differ in shape");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!loss.stops_gradient() && target) {
    throw ConfigError("no_stop_grad cannot be combined with an EMA target");
  }
  const Eigen::Index m = online.output_dim();
  if (predictor.current.rows() != m || predictor.current.cols() != m) {
    throw DimensionError("predictor must be MxM with M = encoder output dim");
  }
  if (predictor.mode == PredictorMode::Trainable && !loss.differentiates_prediction()) {
    throw ConfigError("a trainable predictor needs a loss that differentiates "
                      "the prediction (standard or no_stop_grad), got " +
                      loss.name());
  }
}

PredictorState refresh_predictor(const PredictorState& predictor,
                                 const Matrix& z_batch) {
  if (predictor.mode != PredictorMode::ClosedForm) {
    throw ConfigError("refresh_predictor requires closed_form mode");
  }
  PredictorState out = predictor;
  const SymMatrix batch = batch_correlation(z_batch);
  out.corr_estimate = predictor.has_estimate
                          ? ema_update(predictor.corr_estimate, batch, predictor.corr_tau)
                          : batch;
  out.has_estimate = true;
  const SymEigDecomp eig = sym_eig(out.corr_estimate);
  out.current = matrix_power(eig, predictor.alpha).matrix();
  out.current_sqrt = matrix_power(eig, 0.5 * predictor.alpha).matrix();
  return out;
}

namespace {

struct Forward {
  Matrix z1;  // online(x1)
  Matrix z2;  // online(x2)
  Matrix t1;  // target(x1), or online when no target
  Matrix t2;
};

Forward forward_all(const SiameseState& state, const AugmentedBatch& batch) {
  Forward f;
  f.z1 = state.online.forward_batch(batch.x1);
  f.z2 = state.online.forward_batch(batch.x2);
  if (state.target) {
    f.t1 = state.target->forward_batch(batch.x1);
    f.t2 = state.target->forward_batch(batch.x2);
  } else {
    f.t1 = f.z1;
    f.t2 = f.z2;
  }
  return f;
}

// The cosine of an exactly-zero vector is undefined. Only a ReLU encoder can
// produce one, and every gradient path through it is masked, so such an
// ordering contributes nothing.
bool undefined_cosine(const LossSpec& loss, const Vector& z, const Vector& t) {
  return loss.metric == Metric::Cosine && (z.isZero(0.0) || t.isZero(0.0));
}

struct Gradients {
  Matrix g1;  // dL/dz for online(x1), one column per pair
  Matrix g2;  // dL/dz for online(x2)
  Matrix predictor;  // dL/dW_P (trainable mode)
  double loss = 0.0;
  long long skipped = 0;
};

// Per-pair representational gradients, summed over orderings, not yet
// divided by the batch size.
Gradients representational_gradients(const SiameseState& state,
                                     const Forward& f, const LossSpec& loss) {
  const Eigen::Index m = f.z1.rows();
  const Eigen::Index b = f.z1.cols();
  const Matrix& wp = state.predictor.current;
  const Matrix* wp_sqrt = nullptr;
  Matrix sqrt_storage;
  if (loss.metric == Metric::Cosine && loss.variant == Variant::Iso) {
    if (state.predictor.mode == PredictorMode::ClosedForm ||
        state.predictor.mode == PredictorMode::Identity) {
      wp_sqrt = &state.predictor.current_sqrt;
    } else {
      sqrt_storage = matrix_power(SymMatrix(wp), 0.5).matrix();
      wp_sqrt = &sqrt_storage;
    }
  }
  LossSpec asym = loss;
  asym.symmetrize = false;
  const double weight = loss.symmetrize ? 0.5 : 1.0;
  const bool train_pred = state.predictor.mode == PredictorMode::Trainable;

  Gradients g{Matrix::Zero(m, b), Matrix::Zero(m, b),
              train_pred ? Matrix::Zero(m, m) : Matrix(), 0.0, 0};
  // One ordering: `z` is the online prediction branch, `t` the target branch.
  // Gradients for z land in column i of `own`, those for t (no_stop_grad) in
  // column i of `other`.
  auto accumulate = [&](const Vector& z, const Vector& t, Matrix& own, Matrix& other,
                        Eigen::Index i, const char* tag) {
    if (undefined_cosine(loss, z, t)) {
      ++g.skipped;
      return;
    }
    LossGrads r;
    try {
      r = eval_loss_and_grads(asym, z, t, wp, wp_sqrt);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (pair " + std::to_string(i) + tag + ")");
    }
    g.loss += weight * r.value;
    own.col(i) += weight * r.grad_z1;
    if (!loss.stops_gradient()) other.col(i) += weight * r.grad_z2;
    if (train_pred) g.predictor += weight * r.grad_prediction * z.transpose();
  };
  for (Eigen::Index i = 0; i < b; ++i) {
    accumulate(f.z1.col(i), f.t2.col(i), g.g1, g.g2, i, "");
    if (loss.symmetrize) accumulate(f.z2.col(i), f.t1.col(i), g.g2, g.g1, i, ", swapped");
  }
  return g;
}

Matrix relu_mask(const Matrix& w, const Matrix& x) {
  return (w * x).unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Matrix chain_to_weights(const SiameseState& state, const AugmentedBatch& batch,
                        Matrix g1, Matrix g2) {
  const Matrix& w = state.online.weights;
  if (state.online.activation == Activation::Relu) {
    g1 = g1.cwiseProduct(relu_mask(w, batch.x1));
    g2 = g2.cwiseProduct(relu_mask(w, batch.x2));
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  return (g1 * batch.x1.transpose() + g2 * batch.x2.transpose()) * inv_b;
}

SiameseState with_refreshed_predictor(const SiameseState& state,
                                      const Forward& f, const LossSpec& loss) {
  SiameseState out = state;
  if (state.predictor.mode == PredictorMode::ClosedForm && loss.uses_predictor()) {
    Matrix zb(f.z1.rows(), f.z1.cols() + f.z2.cols());
    zb << f.z1, f.z2;
    out.predictor = refresh_predictor(state.predictor, zb);
  }
  return out;
}

Matrix effective_predictor(const PredictorState& p, const LossSpec& loss,
                           Eigen::Index m) {
  if (!loss.uses_predictor()) return Matrix::Identity(m, m);
  return p.current;
}

}  // namespace

StepOutput train_step(const SiameseState& state, const AugmentedBatch& batch,
                      const LossSpec& loss, bool with_metrics,
                      const Matrix* metric_inputs) {
  state.validate(loss);
  if (batch.size() == 0) throw ConfigError("train_step: empty batch");

  const Forward f = forward_all(state, batch);
  SiameseState next = with_refreshed_predictor(state, f, loss);
  const Eigen::Index m = state.online.output_dim();
  if (!loss.uses_predictor()) next.predictor.current = Matrix::Identity(m, m);

  const Gradients g = representational_gradients(next, f, loss);
  const Matrix dw = chain_to_weights(next, batch, g.g1, g.g2);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  StepMetrics metrics;
  metrics.loss = g.loss * inv_b;
  metrics.grad_norm = dw.norm();
  metrics.skipped_orderings = g.skipped;

  if (with_metrics) {
    Matrix zb;
    if (metric_inputs != nullptr) {
      zb = state.online.forward_batch(*metric_inputs);
    } else {
      zb.resize(m, f.z1.cols() + f.z2.cols());
      zb << f.z1, f.z2;
    }
    const SymMatrix corr = batch_correlation(zb);
    const SymEigDecomp eig = sym_eig(corr);
    metrics.corr_eigenvalues = eig.eigenvalues;
    const Matrix wp = effective_predictor(next.predictor, loss, m);
    metrics.predictor_eigenvalues = sym_eig(SymMatrix(wp)).eigenvalues;
    metrics.alignment = alignment_scores(corr, wp);
    metrics.chi = mean_relative_contributions(eig, zb);
  }

  const double eta = state.learning_rate;
  next.online.weights -= eta * (dw + state.weight_decay * state.online.weights);
  if (next.predictor.mode == PredictorMode::Trainable) {
    next.predictor.current -= eta * g.predictor * inv_b;
  }
  if (next.target) {
    const double tau = *next.ema_tau;
    next.target->weights = tau * next.target->weights + (1.0 - tau) * next.online.weights;
  }
  return {std::move(next), std::move(metrics)};
}

Matrix encoder_gradient(const SiameseState& state, const AugmentedBatch& batch,
                        const LossSpec& loss) {
  state.validate(loss);
  const Forward f = forward_all(state, batch);
  SiameseState refreshed = state;
  if (!loss.uses_predictor()) {
    refreshed.predictor.current =
        Matrix::Identity(state.online.output_dim(), state.online.output_dim());
  }
  const Gradients g = representational_gradients(refreshed, f, loss);
  return chain_to_weights(refreshed, batch, g.g1, g.g2);
}

double frozen_batch_loss(const SiameseState& state, const Matrix& w,
                         const Matrix& frozen_weights,
                         const AugmentedBatch& batch, const LossSpec& loss) {
  const EncoderParams live{w, state.online.activation};
  const EncoderParams frozen{frozen_weights, state.online.activation};
  const EncoderParams& target = state.target ? *state.target : frozen;
  const Matrix l1 = live.forward_batch(batch.x1);
  const Matrix l2 = live.forward_batch(batch.x2);
  const Matrix f1 = frozen.forward_batch(batch.x1);
  const Matrix f2 = frozen.forward_batch(batch.x2);
  const Matrix t1 = target.forward_batch(batch.x1);
  const Matrix t2 = target.forward_batch(batch.x2);
  const Eigen::Index m = w.rows();
  const Matrix wp = loss.uses_predictor() ? state.predictor.current
                                          : Matrix(Matrix::Identity(m, m));
  LossSpec asym = loss;
  asym.symmetrize = false;
  const double weight = loss.symmetrize ? 0.5 : 1.0;

  double total = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (!undefined_cosine(loss, f1.col(i), t2.col(i))) {
      total += weight * eval_surrogate(asym, l1.col(i), l2.col(i), f1.col(i),
                                       t2.col(i), wp);
    }
    if (loss.symmetrize && !undefined_cosine(loss, f2.col(i), t1.col(i))) {
      total += weight * eval_surrogate(asym, l2.col(i), l1.col(i), f2.col(i),
                                       t1.col(i), wp);
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace isolab
