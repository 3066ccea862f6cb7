#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isolab/errors.hpp"
#include "isolab/linalg.hpp"
#include "isolab/losses.hpp"

namespace isolab {

struct TheoryTrajectory;

/// Time series emitted by a training run (or converted from a theory
/// trajectory). Every non-empty per-step array has the length of `steps`.
struct TrajectoryRecord {
  std::vector<long long> steps;
  std::vector<Vector> corr_eig;  // sorted descending
  std::vector<Vector> pred_eig;  // sorted descending
  std::vector<double> losses;
  std::vector<Vector> alignment;  // optional
  std::vector<Vector> chi;        // optional
  bool blow_up = false;

  std::size_t size() const noexcept { return steps.size(); }
  void validate() const;
};

enum class Regime { ConvergeToOne, ConvergeToEqual, Collapse, Diverge, Static };
std::string_view to_string(Regime r);
Regime parse_regime(std::string_view text);

enum class EigenSeries { Correlation, Predictor };

struct Thresholds {
  double window = 0.2;
  double static_drift = 0.01;
  double collapse_ratio = 0.05;
  double divergence_ratio = 100.0;
  double one_band = 0.05;
  double equal_cv = 0.05;
  double equal_min_mean = 0.05;
  std::size_t min_records = 100;
};

struct RegimeEvidence {
  std::size_t window_begin = 0;
  double initial_max = 0.0;
  double terminal_max = 0.0;
  double window_peak = 0.0;
  double terminal_mean = 0.0;
  double terminal_cv = 0.0;
  double max_deviation_from_one = 0.0;
  double window_drift = 0.0;
  Vector window_mean;
  bool blow_up = false;

  std::string summary() const;
};

struct RegimeVerdict {
  Regime label = Regime::Static;
  RegimeEvidence evidence;
  bool matches_table1 = false;
};

class UnclassifiedError : public NumericalError {
 public:
  explicit UnclassifiedError(RegimeEvidence evidence);
  const RegimeEvidence& evidence() const noexcept { return evidence_; }

 private:
  RegimeEvidence evidence_;
};

/// Regime of the sorted eigenvalue series over the trailing window.
/// Precedence: diverge, collapse, converge_to_one, converge_to_equal, static.
/// The label depends only on the record and the thresholds.
RegimeVerdict classify(const TrajectoryRecord& record, const Thresholds& t = {},
                       EigenSeries series = EigenSeries::Correlation);

/// classify, with matches_table1 filled in for `loss`.
RegimeVerdict classify(const TrajectoryRecord& record, const LossSpec& loss,
                       const Thresholds& t = {},
                       EigenSeries series = EigenSeries::Correlation);

/// Regimes accepted for each loss configuration.
std::vector<Regime> expected_regimes(const LossSpec& loss);
bool matches_table1(const LossSpec& loss, Regime label);

/// max_t |sum lambda(t) - sum lambda(0)| / sum lambda(0).
double eigen_sum_drift(const TrajectoryRecord& record,
                       EigenSeries series = EigenSeries::Correlation);

/// How eigenvalues are read before measuring convergence. TraceNormalized
/// divides each sorted vector by its mean, which removes a global scale; use
/// it for scale-invariant losses whose weight norm drifts under discrete steps.
enum class SpectrumScale { Raw, TraceNormalized };

/// First recorded step at which each sorted eigenvalue enters the band of
/// relative width `band` around its terminal (last recorded) value.
std::vector<long long> convergence_steps(const TrajectoryRecord& record,
                                         double band = 0.05,
                                         EigenSeries series = EigenSeries::Correlation,
                                         SpectrumScale scale = SpectrumScale::Raw);
/// max - min of convergence_steps.
long long convergence_spread(const TrajectoryRecord& record, double band = 0.05,
                             EigenSeries series = EigenSeries::Correlation,
                             SpectrumScale scale = SpectrumScale::Raw);
/// TraceNormalized for the cosine metric, Raw otherwise.
SpectrumScale natural_scale(const LossSpec& loss);

/// |u_i^T W_P u_i| / |W_P u_i| for every eigenvector u_i of `corr`, in sorted
/// order. Zero where |W_P u_i| < 1e-12.
Vector alignment_scores(const SymMatrix& corr, const Matrix& predictor);

/// Batch mean of |zhat_m| / |zhat| with zhat = U^T z, for the columns of
/// `z_batch`. Zero columns are skipped.
Vector mean_relative_contributions(const SymEigDecomp& eig, const Matrix& z_batch);

struct TheoryComparison {
  double time_scale = 1.0;   // empirical step = time_scale * theory time + offset
  double time_offset = 0.0;
  Vector sup_deviation;       // per sorted mode
  Vector terminal_deviation;  // per sorted mode
  double max_terminal_deviation() const;
  double max_sup_deviation() const;
};

/// Fits an increasing affine map from theory time to recorded steps by grid
/// search, then reports per-mode deviations between the sorted empirical
/// eigenvalues and the theory eigenvalues interpolated at the mapped times.
TheoryComparison compare_theory(const TrajectoryRecord& record,
                                const TheoryTrajectory& theory,
                                EigenSeries series = EigenSeries::Correlation);

/// Eigenvalue-kind theory trajectory as a record (states sorted, steps =
/// integration step index, predictor series mirrors the states).
TrajectoryRecord to_record(const TheoryTrajectory& theory);

}  // namespace isolab
