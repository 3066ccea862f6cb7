#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "isolab/analysis.hpp"
#include "isolab/data.hpp"
#include "isolab/losses.hpp"
#include "isolab/network.hpp"

namespace isolab {

inline constexpr int kSchemaVersion = 1;
std::string_view library_version() noexcept;

struct ModelConfig {
  int output_dim = 10;
  double init_scale = 1.0;
  Activation activation = Activation::Linear;
  PredictorMode predictor = PredictorMode::ClosedForm;
  double alpha = 0.5;
  double corr_tau = 0.5;
  double predictor_noise = 0.01;
  std::optional<double> ema_tau;
  double weight_decay = 0.0;
  /// Unset: 0.1 for euclidean losses, 0.5 for cosine.
  std::optional<double> learning_rate;
};

struct TheoryConfig {
  bool overlay = false;
  double rate = 0.1;
  double dt = 0.01;
  long long steps = 100000;
};

/// Everything needed to reproduce one run. Serialized as a JSON tree with a
/// `schema_version` field; `--set a.b=value` overrides address its keys.
struct RunConfig {
  DataSpec data;
  /// When unset, data.seed is derived from `seed`.
  bool data_seed_explicit = false;
  ModelConfig model;
  LossSpec loss{Metric::Euclidean, Variant::Standard, true};
  long long steps = 10000;
  long long record_every = 10;
  /// Representation metrics from the un-augmented base samples ("base") or
  /// from both augmented views ("views").
  bool metrics_on_views = false;
  std::uint64_t seed = 0;
  TheoryConfig theory;
  Thresholds thresholds;
  /// Output prefix; `<output>.csv` and `<output>.json` are written when set.
  std::string output;

  double learning_rate() const;
  /// data.seed as used by the run.
  std::uint64_t data_seed() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  /// Applies one `key=value` override. The value is read as JSON when it
  /// parses (numbers, booleans, null) and as a string otherwise.
  void apply_override(std::string_view assignment);
};

enum class RunStatus { Ok, NumericalFailure };

struct RunResult {
  RunConfig config;
  TrajectoryRecord record;
  RunStatus status = RunStatus::Ok;
  std::string error;
  std::optional<RegimeVerdict> verdict;
  /// Set when classification failed (too few steps, unclassified).
  std::string classification_error;
  std::optional<TheoryComparison> comparison;
  SiameseState final_state;

  bool matches_table1() const { return verdict && verdict->matches_table1; }
};

/// Builds the initial state for a configuration.
SiameseState initial_state(const RunConfig& config);

/// Trains, records every `record_every` steps plus the final state,
/// classifies, optionally compares against the integrated eigenvalue ODE and
/// writes outputs when `config.output` is set. A numerical failure stops the
/// run; the partial trajectory is kept and persisted with the error.
RunResult run(const RunConfig& config);

void write_csv(const TrajectoryRecord& record, std::ostream& os);
nlohmann::ordered_json result_json(const RunResult& result);
void write_outputs(const RunResult& result, const std::filesystem::path& prefix);

struct SuiteEntry {
  std::string label;
  int line = 0;
  std::vector<std::string> overrides;
};

/// Line format: `label key=value ...`. Blank lines and `#` comments are
/// skipped. Throws ConfigError with the line number on malformed lines.
std::vector<SuiteEntry> parse_suite(std::istream& in);
std::vector<SuiteEntry> load_suite(const std::filesystem::path& path);

struct SuiteRow {
  std::string label;
  std::string loss;
  std::string verdict;   // empty on error
  std::string expected;  // accepted labels joined by '|'
  bool pass = false;
  std::string error;
};

/// Runs every entry on top of `base`. Rows whose config is invalid or whose
/// run fails are reported as errors; the others are unaffected. With an
/// output directory each run writes `<dir>/<label>.{csv,json}`.
std::vector<SuiteRow> run_suite(const std::vector<SuiteEntry>& entries,
                                const RunConfig& base, int jobs = 1,
                                const std::optional<std::filesystem::path>& out_dir = {});
void print_summary(const std::vector<SuiteRow>& rows, std::ostream& os);

struct SweepRow {
  double init_scale = 0.0;
  RunResult result;
  Vector terminal;  // window mean of the sorted eigenvalues
  double terminal_mean = 0.0;
  double terminal_cv = 0.0;
};

std::vector<SweepRow> sweep_initializations(const RunConfig& base,
                                            const std::vector<double>& init_scales,
                                            int jobs = 1);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace isolab
