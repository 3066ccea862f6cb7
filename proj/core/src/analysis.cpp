#include "isolab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "isolab/theory.hpp"

namespace isolab {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::ConvergeToOne:
      return "converge_to_one";
    case Regime::ConvergeToEqual:
      return "converge_to_equal";
    case Regime::Collapse:
      return "collapse";
    case Regime::Diverge:
      return "diverge";
    case Regime::Static:
      return "static";
  }
  return "?";
}

Regime parse_regime(std::string_view text) {
  for (Regime r : {Regime::ConvergeToOne, Regime::ConvergeToEqual, Regime::Collapse,
                   Regime::Diverge, Regime::Static}) {
    if (text == to_string(r)) return r;
  }
  throw ConfigError("unknown regime '" + std::string(text) + "'");
}

void TrajectoryRecord::validate() const {
  const std::size_t n = steps.size();
  auto check = [n](std::size_t len, const char* name, bool required) {
    if ((required || len != 0) && len != n) {
      throw DimensionError(std::string("TrajectoryRecord: ") + name + " has " +
                           std::to_string(len) + " entries, steps has " +
                           std::to_string(n));
    }
  };
  check(corr_eig.size(), "corr_eig", true);
  check(pred_eig.size(), "pred_eig", false);
  check(losses.size(), "losses", false);
  check(alignment.size(), "alignment", false);
  check(chi.size(), "chi", false);
  for (std::size_t i = 1; i < n; ++i) {
    if (steps[i] <= steps[i - 1]) throw ConfigError("TrajectoryRecord: steps not increasing");
  }
}

std::string RegimeEvidence::summary() const {
  std::ostringstream os;
  os << "initial_max=" << initial_max << " terminal_max=" << terminal_max
     << " window_peak=" << window_peak << " terminal_mean=" << terminal_mean
     << " terminal_cv=" << terminal_cv
     << " max_dev_from_one=" << max_deviation_from_one
     << " window_drift=" << window_drift << " blow_up=" << (blow_up ? 1 : 0);
  return os.str();
}

UnclassifiedError::UnclassifiedError(RegimeEvidence evidence)
    : NumericalError("unclassified trajectory: " + evidence.summary()),
      evidence_(std::move(evidence)) {}

namespace {

const std::vector<Vector>& series_of(const TrajectoryRecord& r, EigenSeries s) {
  const auto& v = s == EigenSeries::Correlation ? r.corr_eig : r.pred_eig;
  if (v.empty()) throw ConfigError("TrajectoryRecord: requested eigenvalue series is empty");
  return v;
}

}  // namespace

RegimeVerdict classify(const TrajectoryRecord& record, const Thresholds& t,
                       EigenSeries series) {
  record.validate();
  const auto& s = series_of(record, series);
  const std::size_t n = s.size();
  if (n < t.min_records && !record.blow_up) {
    throw ConfigError("classify needs at least " + std::to_string(t.min_records) +
                      " recorded steps, got " + std::to_string(n));
  }
  if (!(t.window > 0.0 && t.window <= 1.0)) throw ConfigError("classify: window must lie in (0, 1]");

  RegimeEvidence ev;
  ev.blow_up = record.blow_up;
  const auto offset = static_cast<std::size_t>(std::floor((1.0 - t.window) * n));
  ev.window_begin = std::min(offset, n - 1);
  ev.initial_max = s.front().maxCoeff();
  ev.terminal_max = s.back().maxCoeff();

  const Eigen::Index m = s.front().size();
  ev.window_mean = Vector::Zero(m);
  ev.window_peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = ev.window_begin; i < n; ++i) {
    ev.window_mean += s[i];
    ev.window_peak = std::max(ev.window_peak, s[i].maxCoeff());
  }
  ev.window_mean /= static_cast<double>(n - ev.window_begin);
  ev.terminal_mean = ev.window_mean.mean();
  const double var = (ev.window_mean.array() - ev.terminal_mean).square().mean();
  ev.terminal_cv = ev.terminal_mean != 0.0 ? std::sqrt(var) / std::abs(ev.terminal_mean)
                                           : std::numeric_limits<double>::infinity();
  ev.max_deviation_from_one = (ev.window_mean.array() - 1.0).abs().maxCoeff();

  const Vector& anchor = s[ev.window_begin];
  ev.window_drift = 0.0;
  for (std::size_t i = ev.window_begin; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const double d = std::abs(s[i](k) - anchor(k));
      if (d == 0.0) continue;
      const double rel = anchor(k) != 0.0 ? d / std::abs(anchor(k))
                                          : std::numeric_limits<double>::infinity();
      ev.window_drift = std::max(ev.window_drift, rel);
    }
  }

  RegimeVerdict v;
  const double window_first_max = anchor.maxCoeff();
  if (record.blow_up || ev.window_peak > t.divergence_ratio * ev.initial_max) {
    v.label = Regime::Diverge;
  } else if (ev.terminal_max < t.collapse_ratio * ev.initial_max &&
             (ev.terminal_max < window_first_max || ev.terminal_max == 0.0)) {
    v.label = Regime::Collapse;
  } else if (ev.max_deviation_from_one < t.one_band) {
    v.label = Regime::ConvergeToOne;
  } else if (ev.terminal_cv < t.equal_cv && ev.terminal_mean > t.equal_min_mean) {
    v.label = Regime::ConvergeToEqual;
  } else if (ev.window_drift < t.static_drift) {
    v.label = Regime::Static;
  } else {
    throw UnclassifiedError(std::move(ev));
  }
  v.evidence = std::move(ev);
  return v;
}

RegimeVerdict classify(const TrajectoryRecord& record, const LossSpec& loss,
                       const Thresholds& t, EigenSeries series) {
  RegimeVerdict v = classify(record, t, series);
  v.matches_table1 = matches_table1(loss, v.label);
  return v;
}

std::vector<Regime> expected_regimes(const LossSpec& loss) {
  loss.validate();
  if (loss.metric == Metric::Euclidean) {
    switch (loss.variant) {
      case Variant::Standard:
      case Variant::Iso:
      case Variant::IsoAlternative:
        return {Regime::ConvergeToOne};
      case Variant::NoStopGrad:
        return {Regime::Collapse};
      case Variant::NoPredictor:
        return {Regime::Static};
    }
  }
  switch (loss.variant) {
    case Variant::NoStopGrad:
      return {Regime::Diverge};
    case Variant::NoPredictor:
      return {Regime::ConvergeToEqual, Regime::Static};
    default:
      return {Regime::ConvergeToEqual};
  }
}

bool matches_table1(const LossSpec& loss, Regime label) {
  const auto ok = expected_regimes(loss);
  return std::find(ok.begin(), ok.end(), label) != ok.end();
}

double eigen_sum_drift(const TrajectoryRecord& record, EigenSeries series) {
  record.validate();
  const auto& s = series_of(record, series);
  const double s0 = s.front().sum();
  if (s0 == 0.0) throw NumericalError("eigen_sum_drift: initial eigenvalue sum is zero");
  double drift = 0.0;
  for (const Vector& v : s) drift = std::max(drift, std::abs(v.sum() - s0) / std::abs(s0));
  return drift;
}

std::vector<long long> convergence_steps(const TrajectoryRecord& record, double band,
                                         EigenSeries series, SpectrumScale scale) {
  record.validate();
  if (!(band > 0.0)) throw ConfigError("convergence_steps: band must be positive");
  std::vector<Vector> s = series_of(record, series);
  if (scale == SpectrumScale::TraceNormalized) {
    for (auto& v : s) {
      const double mean = v.mean();
      if (!(mean > 0.0)) throw NumericalError("convergence_steps: non-positive eigenvalue mean");
      v /= mean;
    }
  }
  const Vector& terminal = s.back();
  std::vector<long long> out(static_cast<std::size_t>(terminal.size()), record.steps.back());
  for (Eigen::Index m = 0; m < terminal.size(); ++m) {
    const double tol = band * std::abs(terminal(m));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (std::abs(s[i](m) - terminal(m)) <= tol) {
        out[static_cast<std::size_t>(m)] = record.steps[i];
        break;
      }
    }
  }
  return out;
}

long long convergence_spread(const TrajectoryRecord& record, double band,
                             EigenSeries series, SpectrumScale scale) {
  const auto steps = convergence_steps(record, band, series, scale);
  const auto [lo, hi] = std::minmax_element(steps.begin(), steps.end());
  return *hi - *lo;
}

SpectrumScale natural_scale(const LossSpec& loss) {
  return loss.metric == Metric::Cosine ? SpectrumScale::TraceNormalized : SpectrumScale::Raw;
}

Vector alignment_scores(const SymMatrix& corr, const Matrix& predictor) {
  if (predictor.rows() != corr.dim() || predictor.cols() != corr.dim()) {
    throw DimensionError("alignment_scores: predictor must match corr dimension");
  }
  const SymEigDecomp eig = sym_eig(corr);
  Vector out(corr.dim());
  for (Eigen::Index i = 0; i < corr.dim(); ++i) {
    const Vector u = eig.basis.col(i);
    const Vector wu = predictor * u;
    const double n = wu.norm();
    out(i) = n < 1e-12 ? 0.0 : std::min(1.0, std::abs(u.dot(wu)) / n);
  }
  return out;
}

Vector mean_relative_contributions(const SymEigDecomp& eig, const Matrix& z_batch) {
  if (z_batch.rows() != eig.basis.rows()) {
    throw DimensionError("mean_relative_contributions: dimension mismatch");
  }
  const Matrix zhat = eig.basis.transpose() * z_batch;
  Vector acc = Vector::Zero(zhat.rows());
  long long used = 0;
  for (Eigen::Index j = 0; j < zhat.cols(); ++j) {
    const double n = zhat.col(j).norm();
    if (n == 0.0) continue;
    acc += zhat.col(j).cwiseAbs() / n;
    ++used;
  }
  return used > 0 ? Vector(acc / static_cast<double>(used)) : acc;
}

double TheoryComparison::max_terminal_deviation() const {
  return terminal_deviation.size() ? terminal_deviation.maxCoeff() : 0.0;
}

double TheoryComparison::max_sup_deviation() const {
  return sup_deviation.size() ? sup_deviation.maxCoeff() : 0.0;
}

namespace {

Vector sorted_desc(Vector v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<>());
  return v;
}

// Linear interpolation of the (sorted) theory states at time tau.
struct TheoryInterp {
  const std::vector<double>& times;
  const std::vector<Vector>& states;

  Vector at(double tau) const {
    if (tau <= times.front()) return states.front();
    if (tau >= times.back()) return states.back();
    const auto it = std::upper_bound(times.begin(), times.end(), tau);
    const auto hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (tau - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * states[lo] + w * states[hi];
  }
};

double fit_error(const std::vector<long long>& steps, const std::vector<Vector>& emp,
                 const TheoryInterp& th, double a, double b) {
  double err = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double tau = (static_cast<double>(steps[i]) - b) / a;
    err += (emp[i] - th.at(tau)).squaredNorm();
  }
  return err;
}

}  // namespace

TheoryComparison compare_theory(const TrajectoryRecord& record,
                                const TheoryTrajectory& theory, EigenSeries series) {
  record.validate();
  const auto& emp = series_of(record, series);
  if (theory.kind != StateKind::Eigenvalues) {
    throw ConfigError("compare_theory needs an eigenvalue trajectory");
  }
  if (theory.states.empty() || theory.states.size() != theory.times.size()) {
    throw ConfigError("compare_theory: empty or inconsistent theory trajectory");
  }
  if (theory.states.front().size() != emp.front().size()) {
    throw DimensionError("compare_theory: theory has " +
                         std::to_string(theory.states.front().size()) +
                         " modes, record has " + std::to_string(emp.front().size()));
  }
  std::vector<Vector> sorted;
  sorted.reserve(theory.states.size());
  for (const Vector& v : theory.states) sorted.push_back(sorted_desc(v));
  const TheoryInterp th{theory.times, sorted};

  const double span = static_cast<double>(record.steps.back() - record.steps.front());
  const double b_step = span > 0.0 ? span / 20.0 : 1.0;

  // Coarse grid containing a = 1, b = 0 exactly, then a local refinement.
  double best_a = 1.0, best_b = 0.0;
  double best = fit_error(record.steps, emp, th, best_a, best_b);
  for (int k = -40; k <= 40; ++k) {
    const double a = std::pow(10.0, k / 10.0);
    for (int j = -10; j <= 10; ++j) {
      const double b = j * b_step;
      const double e = fit_error(record.steps, emp, th, a, b);
      if (e < best) best = e, best_a = a, best_b = b;
    }
  }
  const double a0 = best_a, b0 = best_b;
  for (int k = -10; k <= 10; ++k) {
    const double a = a0 * std::pow(10.0, k / 100.0);
    for (int j = -10; j <= 10; ++j) {
      const double b = b0 + j * b_step / 10.0;
      const double e = fit_error(record.steps, emp, th, a, b);
      if (e < best) best = e, best_a = a, best_b = b;
    }
  }

  TheoryComparison out;
  out.time_scale = best_a;
  out.time_offset = best_b;
  const Eigen::Index m = emp.front().size();
  out.sup_deviation = Vector::Zero(m);
  for (std::size_t i = 0; i < emp.size(); ++i) {
    const Vector d =
        (emp[i] - th.at((static_cast<double>(record.steps[i]) - best_b) / best_a)).cwiseAbs();
    out.sup_deviation = out.sup_deviation.cwiseMax(d);
    if (i + 1 == emp.size()) out.terminal_deviation = d;
  }
  return out;
}

TrajectoryRecord to_record(const TheoryTrajectory& theory) {
  if (theory.kind != StateKind::Eigenvalues) {
    throw ConfigError("to_record needs an eigenvalue trajectory");
  }
  if (!(theory.dt > 0.0)) throw ConfigError("to_record: trajectory has no step size");
  TrajectoryRecord r;
  r.blow_up = theory.diverged;
  for (std::size_t i = 0; i < theory.states.size(); ++i) {
    r.steps.push_back(std::llround(theory.times[i] / theory.dt));
    r.corr_eig.push_back(sorted_desc(theory.states[i]));
  }
  r.pred_eig = r.corr_eig;
  return r;
}

}  // namespace isolab
