#include "isolab/losses.hpp"

#include <cmath>

#include "isolab/errors.hpp"

namespace isolab {

std::string_view to_string(Metric m) {
  return m == Metric::Euclidean ? "euclidean" : "cosine";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Standard:
      return "standard";
    case Variant::NoStopGrad:
      return "no_stop_grad";
    case Variant::NoPredictor:
      return "no_predictor";
    case Variant::Iso:
      return "iso";
    case Variant::IsoAlternative:
      return "iso_alternative";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  if (text == "euclidean" || text == "euc") return Metric::Euclidean;
  if (text == "cosine" || text == "cos") return Metric::Cosine;
  throw ConfigError("unknown loss metric '" + std::string(text) + "'");
}

Variant parse_variant(std::string_view text) {
  if (text == "standard") return Variant::Standard;
  if (text == "no_stop_grad" || text == "nosg") return Variant::NoStopGrad;
  if (text == "no_predictor" || text == "nopred") return Variant::NoPredictor;
  if (text == "iso") return Variant::Iso;
  if (text == "iso_alternative") return Variant::IsoAlternative;
  throw ConfigError("unknown loss variant '" + std::string(text) + "'");
}

void LossSpec::validate() const {
  if (variant == Variant::IsoAlternative && metric != Metric::Euclidean) {
    throw ConfigError("iso_alternative is only defined for the euclidean metric");
  }
}

std::string LossSpec::name() const {
  return std::string(to_string(metric)) + "/" + std::string(to_string(variant));
}

LossSpec LossSpec::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw ConfigError("loss spec must look like 'metric/variant', got '" +
                      std::string(text) + "'");
  }
  LossSpec spec{parse_metric(text.substr(0, slash)),
                parse_variant(text.substr(slash + 1)), false};
  spec.validate();
  return spec;
}

namespace {

double checked_norm(const Vector& v, const char* which) {
  const double n = v.norm();
  if (!(n > kCosineNormFloor)) throw NormUnderflowError(which, n);
  return n;
}

void check_dims(const Vector& z1, const Vector& z2, const Matrix& predictor,
                bool uses_predictor) {
  if (z1.size() != z2.size()) {
    throw DimensionError("loss: z1 and z2 differ in dimension");
  }
  if (uses_predictor &&
      (predictor.rows() != z1.size() || predictor.cols() != z1.size())) {
    throw DimensionError("loss: predictor must be MxM with M = dim(z)");
  }
}

Matrix resolve_sqrt(const Matrix& predictor, const Matrix* predictor_sqrt) {
  if (predictor_sqrt != nullptr) return *predictor_sqrt;
  return matrix_power(SymMatrix(predictor), 0.5).matrix();
}

// Gradient of -p.t / (|p| |t|) with respect to p.
Vector cosine_grad_first(const Vector& p, const Vector& t, double np, double nt) {
  const double dot = p.dot(t);
  return -t / (np * nt) + (dot / (np * np * np * nt)) * p;
}

LossGrads eval_asymmetric(const LossSpec& spec, const Vector& z1,
                          const Vector& z2, const Matrix& wp,
                          const Matrix* wp_sqrt) {
  const Eigen::Index m = z1.size();
  LossGrads out;
  out.grad_z2 = Vector::Zero(m);

  if (spec.metric == Metric::Euclidean) {
    switch (spec.variant) {
      case Variant::Standard:
      case Variant::NoStopGrad: {
        const Vector r = wp * z1 - z2;
        out.value = 0.5 * r.squaredNorm();
        out.grad_z1 = wp.transpose() * r;
        out.grad_prediction = r;
        if (spec.variant == Variant::NoStopGrad) out.grad_z2 = -r;
        return out;
      }
      case Variant::NoPredictor: {
        const Vector r = z1 - z2;
        out.value = 0.5 * r.squaredNorm();
        out.grad_z1 = r;
        return out;
      }
      case Variant::Iso: {
        // 1/2 |z1 - SG(z2 + z1 - W_P z1)|^2: same value as the standard loss,
        // identity Jacobian on the live z1.
        const Vector r = wp * z1 - z2;
        out.value = 0.5 * r.squaredNorm();
        out.grad_z1 = r;
        return out;
      }
      case Variant::IsoAlternative: {
        // SG(W_P z1 - z2) . (z1 - SG(z2))
        const Vector r = wp * z1 - z2;
        out.value = r.dot(z1 - z2);
        out.grad_z1 = r;
        return out;
      }
    }
  }

  const double n2 = checked_norm(z2, "z2");
  checked_norm(z1, "z1");
  switch (spec.variant) {
    case Variant::Standard:
    case Variant::NoStopGrad: {
      const Vector p = wp * z1;
      const double np = checked_norm(p, "W_P z1");
      out.value = -p.dot(z2) / (np * n2);
      out.grad_prediction = cosine_grad_first(p, z2, np, n2);
      out.grad_z1 = wp.transpose() * out.grad_prediction;
      if (spec.variant == Variant::NoStopGrad) {
        out.grad_z2 = cosine_grad_first(z2, p, n2, np);
      }
      return out;
    }
    case Variant::NoPredictor: {
      const double n1 = z1.norm();
      out.value = -z1.dot(z2) / (n1 * n2);
      out.grad_z1 = cosine_grad_first(z1, z2, n1, n2);
      return out;
    }
    case Variant::Iso: {
      // -z1 . SG(z2 / (|W_P z1| |z2|))
      //   + 1/2 SG((W_P z1).z2 / (|W_P z1|^3 |z2|)) |W_P^{1/2} z1|^2
      const Vector p = wp * z1;
      const double np = checked_norm(p, "W_P z1");
      const Matrix s = resolve_sqrt(wp, wp_sqrt);
      const Vector sz = s * z1;
      const double coeff = p.dot(z2) / (np * np * np * n2);
      out.value = -z1.dot(z2) / (np * n2) + 0.5 * coeff * sz.squaredNorm();
      out.grad_z1 = -z2 / (np * n2) + coeff * (s.transpose() * sz);
      return out;
    }
    case Variant::IsoAlternative:
      break;
  }
  throw ConfigError("iso_alternative is only defined for the euclidean metric");
}

double surrogate_asymmetric(const LossSpec& spec, const Vector& l1,
                            const Vector& l2, const Vector& f1,
                            const Vector& f2, const Matrix& wp,
                            const Matrix* wp_sqrt) {
  if (spec.metric == Metric::Euclidean) {
    switch (spec.variant) {
      case Variant::Standard:
        return 0.5 * (wp * l1 - f2).squaredNorm();
      case Variant::NoStopGrad:
        return 0.5 * (wp * l1 - l2).squaredNorm();
      case Variant::NoPredictor:
        return 0.5 * (l1 - f2).squaredNorm();
      case Variant::Iso:
        return 0.5 * (l1 - (f2 + f1 - wp * f1)).squaredNorm();
      case Variant::IsoAlternative:
        return (wp * f1 - f2).dot(l1 - f2);
    }
  }
  switch (spec.variant) {
    case Variant::Standard: {
      const Vector p = wp * l1;
      return -p.dot(f2) / (checked_norm(p, "W_P z1") * checked_norm(f2, "z2"));
    }
    case Variant::NoStopGrad: {
      const Vector p = wp * l1;
      return -p.dot(l2) / (checked_norm(p, "W_P z1") * checked_norm(l2, "z2"));
    }
    case Variant::NoPredictor:
      return -l1.dot(f2) / (checked_norm(l1, "z1") * checked_norm(f2, "z2"));
    case Variant::Iso: {
      const Vector pf = wp * f1;
      const double np = checked_norm(pf, "W_P z1");
      const double n2 = checked_norm(f2, "z2");
      const Matrix s = resolve_sqrt(wp, wp_sqrt);
      const double coeff = pf.dot(f2) / (np * np * np * n2);
      return -l1.dot(f2) / (np * n2) + 0.5 * coeff * (s * l1).squaredNorm();
    }
    case Variant::IsoAlternative:
      break;
  }
  throw ConfigError("iso_alternative is only defined for the euclidean metric");
}

}  // namespace

LossGrads eval_loss_and_grads(const LossSpec& spec, const Vector& z1,
                              const Vector& z2, const Matrix& predictor,
                              const Matrix* predictor_sqrt) {
  spec.validate();
  check_dims(z1, z2, predictor, spec.uses_predictor());
  const Matrix* sqrt_ptr = predictor_sqrt;
  Matrix sqrt_storage;
  if (spec.metric == Metric::Cosine && spec.variant == Variant::Iso &&
      sqrt_ptr == nullptr) {
    sqrt_storage = resolve_sqrt(predictor, nullptr);
    sqrt_ptr = &sqrt_storage;
  }

  if (!spec.symmetrize) return eval_asymmetric(spec, z1, z2, predictor, sqrt_ptr);

  const LossGrads a = eval_asymmetric(spec, z1, z2, predictor, sqrt_ptr);
  const LossGrads b = eval_asymmetric(spec, z2, z1, predictor, sqrt_ptr);
  LossGrads out;
  out.value = 0.5 * (a.value + b.value);
  out.grad_z1 = 0.5 * (a.grad_z1 + b.grad_z2);
  out.grad_z2 = 0.5 * (a.grad_z2 + b.grad_z1);
  return out;
}

double eval_surrogate(const LossSpec& spec, const Vector& live1,
                      const Vector& live2, const Vector& frozen1,
                      const Vector& frozen2, const Matrix& predictor,
                      const Matrix* predictor_sqrt) {
  spec.validate();
  check_dims(live1, live2, predictor, spec.uses_predictor());
  const double forward = surrogate_asymmetric(spec, live1, live2, frozen1,
                                              frozen2, predictor, predictor_sqrt);
  if (!spec.symmetrize) return forward;
  const double swapped = surrogate_asymmetric(spec, live2, live1, frozen2,
                                              frozen1, predictor, predictor_sqrt);
  return 0.5 * (forward + swapped);
}

double eval_loss_eigenbasis(const LossSpec& spec, const Vector& zhat1,
                            const Vector& zhat2, const Vector& eigenvalues) {
  if (spec.variant != Variant::Standard) {
    throw ConfigError("eval_loss_eigenbasis supports the standard variant only");
  }
  if (zhat1.size() != eigenvalues.size() || zhat2.size() != eigenvalues.size()) {
    throw DimensionError("eval_loss_eigenbasis: eigenvalues must have length M");
  }
  const Vector scaled = eigenvalues.cwiseProduct(zhat1);
  if (spec.metric == Metric::Euclidean) {
    return 0.5 * (scaled - zhat2).squaredNorm();
  }
  const double n1 = checked_norm(scaled, "D zhat1");
  const double n2 = checked_norm(zhat2, "zhat2");
  double sum = 0.0;
  for (Eigen::Index m = 0; m < eigenvalues.size(); ++m) {
    sum += eigenvalues(m) * zhat1(m) * zhat2(m);
  }
  return -sum / (n1 * n2);
}

}  // namespace isolab
