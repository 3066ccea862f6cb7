#include "isolab/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "isolab/errors.hpp"
#include "isolab/rng.hpp"
#include "isolab/theory.hpp"

#ifndef ISOLAB_VERSION
#define ISOLAB_VERSION "0.0.0"
#endif

namespace isolab {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view library_version() noexcept { return ISOLAB_VERSION; }

namespace {

// Stream ids for Rng::substream.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPredictorStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kDataStream = 4;

template <typename T>
T get_as(const json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type: " + j.dump());
  }
}

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError("config section '" + std::string(where) + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + std::string(where) +
                        (where.empty() ? "" : ".") + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  if (auto it = obj.find(key); it != obj.end()) {
    out = get_as<T>(*it, std::string(where) + "." + key);
  }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out,
                   std::string_view where) {
  if (auto it = obj.find(key); it != obj.end()) {
    if (it->is_null()) {
      out.reset();
    } else {
      out = get_as<T>(*it, std::string(where) + "." + key);
    }
  }
}

template <typename T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

double RunConfig::learning_rate() const {
  if (model.learning_rate) return *model.learning_rate;
  return loss.metric == Metric::Euclidean ? 0.1 : 0.5;
}

std::uint64_t RunConfig::data_seed() const {
  return data_seed_explicit ? data.seed : Rng(seed).substream(kDataStream).next_u64();
}

void RunConfig::validate() const {
  data.validate();
  loss.validate();
  if (model.output_dim < 1) throw ConfigError("model.output_dim must be positive");
  if (!(model.init_scale > 0.0)) throw ConfigError("model.init_scale must be positive");
  if (!(model.alpha > 0.0)) throw ConfigError("model.alpha must be positive");
  if (!(model.corr_tau >= 0.0 && model.corr_tau < 1.0)) {
    throw ConfigError("model.corr_tau must lie in [0, 1)");
  }
  if (!(model.predictor_noise >= 0.0)) throw ConfigError("model.predictor_noise must be non-negative");
  if (model.ema_tau && !(*model.ema_tau >= 0.0 && *model.ema_tau <= 1.0)) {
    throw ConfigError("model.ema_tau must lie in [0, 1]");
  }
  if (!(model.weight_decay >= 0.0)) throw ConfigError("model.weight_decay must be non-negative");
  if (!(learning_rate() > 0.0)) throw ConfigError("model.learning_rate must be positive");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (record_every < 1) throw ConfigError("record_every must be at least 1");
  if (!(theory.rate > 0.0) || !(theory.dt > 0.0) || theory.steps < 1) {
    throw ConfigError("theory.rate, theory.dt and theory.steps must be positive");
  }
  if (!(thresholds.window > 0.0 && thresholds.window <= 1.0)) {
    throw ConfigError("thresholds.window must lie in (0, 1]");
  }
  // Catches predictor/loss combinations before any work is done.
  if (!loss.stops_gradient() && model.ema_tau) {
    throw ConfigError("no_stop_grad cannot be combined with an EMA target");
  }
  if (model.predictor == PredictorMode::Trainable && !loss.differentiates_prediction()) {
    throw ConfigError("a trainable predictor needs loss variant standard or no_stop_grad");
  }
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = seed;
  j["steps"] = steps;
  j["record_every"] = record_every;
  j["metric_inputs"] = metrics_on_views ? "views" : "base";
  j["data"] = {{"input_dim", data.input_dim},
               {"num_samples", data.num_samples},
               {"mode", to_string(data.mode)},
               {"aug_sigma", data.aug_sigma},
               {"seed", data_seed_explicit ? ordered_json(data.seed) : ordered_json(nullptr)}};
  j["model"] = {{"output_dim", model.output_dim},
                {"init_scale", model.init_scale},
                {"activation", to_string(model.activation)},
                {"predictor", to_string(model.predictor)},
                {"alpha", model.alpha},
                {"corr_tau", model.corr_tau},
                {"predictor_noise", model.predictor_noise},
                {"ema_tau", optional_json(model.ema_tau)},
                {"weight_decay", model.weight_decay},
                {"learning_rate", optional_json(model.learning_rate)}};
  j["loss"] = {{"metric", to_string(loss.metric)},
               {"variant", to_string(loss.variant)},
               {"symmetrize", loss.symmetrize}};
  j["theory"] = {{"overlay", theory.overlay},
                 {"rate", theory.rate},
                 {"dt", theory.dt},
                 {"steps", theory.steps}};
  j["thresholds"] = {{"window", thresholds.window},
                     {"static_drift", thresholds.static_drift},
                     {"collapse_ratio", thresholds.collapse_ratio},
                     {"divergence_ratio", thresholds.divergence_ratio},
                     {"one_band", thresholds.one_band},
                     {"equal_cv", thresholds.equal_cv},
                     {"equal_min_mean", thresholds.equal_min_mean},
                     {"min_records", thresholds.min_records}};
  j["output"] = output;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "", {"schema_version", "seed", "steps", "record_every", "metric_inputs",
                         "data", "model",
                         "loss", "theory", "thresholds", "output"});
  if (auto it = j.find("schema_version"); it != j.end()) {
    const int v = get_as<int>(*it, "schema_version");
    if (v != kSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(v) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
  }
  read(j, "seed", c.seed, "");
  read(j, "steps", c.steps, "");
  read(j, "record_every", c.record_every, "");
  read(j, "output", c.output, "");
  if (auto it = j.find("metric_inputs"); it != j.end()) {
    const auto v = get_as<std::string>(*it, "metric_inputs");
    if (v != "base" && v != "views") {
      throw ConfigError("metric_inputs must be 'base' or 'views', got '" + v + "'");
    }
    c.metrics_on_views = v == "views";
  }

  if (auto it = j.find("data"); it != j.end()) {
    const json& d = *it;
    reject_unknown(d, "data", {"input_dim", "num_samples", "mode", "aug_sigma", "seed"});
    read(d, "input_dim", c.data.input_dim, "data");
    read(d, "num_samples", c.data.num_samples, "data");
    read(d, "aug_sigma", c.data.aug_sigma, "data");
    if (auto m = d.find("mode"); m != d.end()) {
      c.data.mode = parse_data_mode(get_as<std::string>(*m, "data.mode"));
    }
    std::optional<std::uint64_t> ds;
    read_optional(d, "seed", ds, "data");
    c.data_seed_explicit = ds.has_value();
    c.data.seed = ds.value_or(0);
  }
  if (auto it = j.find("model"); it != j.end()) {
    const json& m = *it;
    reject_unknown(m, "model", {"output_dim", "init_scale", "activation", "predictor", "alpha",
                                "corr_tau", "predictor_noise", "ema_tau", "weight_decay",
                                "learning_rate"});
    read(m, "output_dim", c.model.output_dim, "model");
    read(m, "init_scale", c.model.init_scale, "model");
    read(m, "alpha", c.model.alpha, "model");
    read(m, "corr_tau", c.model.corr_tau, "model");
    read(m, "predictor_noise", c.model.predictor_noise, "model");
    read(m, "weight_decay", c.model.weight_decay, "model");
    read_optional(m, "ema_tau", c.model.ema_tau, "model");
    read_optional(m, "learning_rate", c.model.learning_rate, "model");
    if (auto a = m.find("activation"); a != m.end()) {
      c.model.activation = parse_activation(get_as<std::string>(*a, "model.activation"));
    }
    if (auto p = m.find("predictor"); p != m.end()) {
      c.model.predictor = parse_predictor_mode(get_as<std::string>(*p, "model.predictor"));
    }
  }
  if (auto it = j.find("loss"); it != j.end()) {
    const json& l = *it;
    reject_unknown(l, "loss", {"metric", "variant", "symmetrize"});
    if (auto m = l.find("metric"); m != l.end()) {
      c.loss.metric = parse_metric(get_as<std::string>(*m, "loss.metric"));
    }
    if (auto v = l.find("variant"); v != l.end()) {
      c.loss.variant = parse_variant(get_as<std::string>(*v, "loss.variant"));
    }
    read(l, "symmetrize", c.loss.symmetrize, "loss");
  }
  if (auto it = j.find("theory"); it != j.end()) {
    const json& t = *it;
    reject_unknown(t, "theory", {"overlay", "rate", "dt", "steps"});
    read(t, "overlay", c.theory.overlay, "theory");
    read(t, "rate", c.theory.rate, "theory");
    read(t, "dt", c.theory.dt, "theory");
    read(t, "steps", c.theory.steps, "theory");
  }
  if (auto it = j.find("thresholds"); it != j.end()) {
    const json& t = *it;
    reject_unknown(t, "thresholds", {"window", "static_drift", "collapse_ratio",
                                     "divergence_ratio", "one_band", "equal_cv",
                                     "equal_min_mean", "min_records"});
    read(t, "window", c.thresholds.window, "thresholds");
    read(t, "static_drift", c.thresholds.static_drift, "thresholds");
    read(t, "collapse_ratio", c.thresholds.collapse_ratio, "thresholds");
    read(t, "divergence_ratio", c.thresholds.divergence_ratio, "thresholds");
    read(t, "one_band", c.thresholds.one_band, "thresholds");
    read(t, "equal_cv", c.thresholds.equal_cv, "thresholds");
    read(t, "equal_min_mean", c.thresholds.equal_min_mean, "thresholds");
    read(t, "min_records", c.thresholds.min_records, "thresholds");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  // Overrides of the loss name are accepted in the "metric/variant" form too.
  if (key == "loss") {
    const LossSpec parsed = LossSpec::parse(text);
    loss.metric = parsed.metric;
    loss.variant = parsed.variant;
    return;
  }

  json tree = to_json();
  json* node = &tree;
  std::string_view rest = key;
  while (true) {
    const auto dot = rest.find('.');
    const std::string part(rest.substr(0, dot));
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    rest = rest.substr(dot + 1);
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "' names a section");
  *node = value;
  *this = from_json(tree);
}

SiameseState initial_state(const RunConfig& config) {
  config.validate();
  const Rng root(config.seed);
  Rng init = root.substream(kInitStream);
  SiameseState s;
  s.online = EncoderParams::random(config.model.output_dim, config.data.input_dim,
                                   config.model.init_scale, config.model.activation, init);
  const auto m = static_cast<Eigen::Index>(config.model.output_dim);
  switch (config.model.predictor) {
    case PredictorMode::ClosedForm:
      s.predictor = PredictorState::closed_form(m, config.model.alpha, config.model.corr_tau);
      break;
    case PredictorMode::Identity:
      s.predictor = PredictorState::identity(m);
      break;
    case PredictorMode::Trainable: {
      Rng prng = root.substream(kPredictorStream);
      s.predictor = PredictorState::trainable(m, config.model.predictor_noise, prng);
      break;
    }
  }
  if (config.model.ema_tau) {
    s.target = s.online;
    s.ema_tau = config.model.ema_tau;
  }
  s.weight_decay = config.model.weight_decay;
  s.learning_rate = config.learning_rate();
  s.validate(config.loss);
  return s;
}

namespace {

bool weights_blown_up(const SiameseState& s) {
  const auto bad = [](const Matrix& w) {
    return !w.allFinite() || w.cwiseAbs().maxCoeff() > kBlowUpThreshold;
  };
  return bad(s.online.weights) || (s.target && bad(s.target->weights)) ||
         !s.predictor.current.allFinite();
}

void append(TrajectoryRecord& r, long long step, const StepMetrics& m) {
  r.steps.push_back(step);
  r.corr_eig.push_back(m.corr_eigenvalues);
  r.pred_eig.push_back(m.predictor_eigenvalues);
  r.losses.push_back(m.loss);
  r.alignment.push_back(m.alignment);
  r.chi.push_back(m.chi);
}

}  // namespace

RunResult run(const RunConfig& config) {
  RunResult result;
  result.config = config;
  config.validate();
  if (!config.data_seed_explicit) result.config.data.seed = config.data_seed();

  DataSpec data = config.data;
  data.seed = config.data_seed();
  const Matrix base = make_dataset(data);
  SiameseState state = initial_state(config);
  const Rng augment_root = Rng(config.seed).substream(kAugmentStream);

  try {
    for (long long step = 0; step <= config.steps; ++step) {
      Rng aug = augment_root.substream(static_cast<std::uint64_t>(step));
      const AugmentedBatch batch = sample_batch(base, config.data.aug_sigma, aug);
      const bool last = step == config.steps;
      const bool record = last || step % config.record_every == 0;
      StepOutput out = train_step(state, batch, config.loss, record,
                                  config.metrics_on_views ? nullptr : &base);
      if (record) append(result.record, step, out.metrics);
      if (last) break;  // the final entry measures the trained state only
      state = std::move(out.state);
      if (weights_blown_up(state)) {
        result.record.blow_up = true;
        break;
      }
    }
  } catch (const NumericalError& e) {
    result.status = RunStatus::NumericalFailure;
    result.error = e.what();
  }
  result.final_state = state;

  if (result.status == RunStatus::Ok && !result.record.corr_eig.empty()) {
    try {
      result.verdict = classify(result.record, config.loss, config.thresholds);
    } catch (const Error& e) {
      result.classification_error = e.what();
    }
    if (config.theory.overlay && has_table1_rhs(config.loss)) {
      const LossSpec loss = config.loss;
      const double rate = config.theory.rate;
      const TheoryTrajectory th = integrate(
          [&](const Vector& l) { return table1_eigen_rhs(loss, l, rate); },
          result.record.corr_eig.front(), config.theory.dt, config.theory.steps,
          std::max<long long>(1, config.theory.steps / 2000), StateKind::Eigenvalues,
          loss.name());
      result.comparison = compare_theory(result.record, th);
    }
  }
  if (!config.output.empty()) write_outputs(result, config.output);
  return result;
}

void write_csv(const TrajectoryRecord& record, std::ostream& os) {
  os << "step,series,index,value\n";
  auto emit = [&](long long step, const char* series, Eigen::Index idx, double v) {
    os << step << ',' << series << ',' << idx << ',' << format_double(v) << '\n';
  };
  auto emit_vec = [&](long long step, const char* series, const std::vector<Vector>& s,
                      std::size_t i) {
    if (s.empty()) return;
    for (Eigen::Index k = 0; k < s[i].size(); ++k) emit(step, series, k, s[i](k));
  };
  for (std::size_t i = 0; i < record.size(); ++i) {
    const long long step = record.steps[i];
    emit_vec(step, "corr_eig", record.corr_eig, i);
    emit_vec(step, "pred_eig", record.pred_eig, i);
    if (!record.losses.empty()) emit(step, "loss", 0, record.losses[i]);
    emit_vec(step, "alignment", record.alignment, i);
    emit_vec(step, "chi", record.chi, i);
  }
}

ordered_json result_json(const RunResult& r) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = library_version();
  j["prng"] = Rng::kDescription;
  j["status"] = r.status == RunStatus::Ok ? "ok" : "error";
  j["error"] = r.error.empty() ? ordered_json(nullptr) : ordered_json(r.error);
  j["loss"] = r.config.loss.name();
  j["recorded_steps"] = r.record.size();
  j["blow_up"] = r.record.blow_up;
  if (r.verdict) {
    const RegimeEvidence& e = r.verdict->evidence;
    ordered_json expected = ordered_json::array();
    for (Regime g : expected_regimes(r.config.loss)) expected.push_back(to_string(g));
    j["verdict"] = {{"label", to_string(r.verdict->label)},
                    {"expected", expected},
                    {"matches_table1", r.verdict->matches_table1},
                    {"evidence",
                     {{"window_begin", e.window_begin},
                      {"initial_max", e.initial_max},
                      {"terminal_max", e.terminal_max},
                      {"window_peak", e.window_peak},
                      {"terminal_mean", e.terminal_mean},
                      {"terminal_cv", e.terminal_cv},
                      {"max_deviation_from_one", e.max_deviation_from_one},
                      {"window_drift", e.window_drift}}}};
  } else {
    j["verdict"] = nullptr;
  }
  if (!r.classification_error.empty()) j["classification_error"] = r.classification_error;
  if (!r.record.corr_eig.empty()) j["eigen_sum_drift"] = eigen_sum_drift(r.record);
  if (r.comparison) {
    const TheoryComparison& c = *r.comparison;
    j["theory_comparison"] = {
        {"time_scale", c.time_scale},
        {"time_offset", c.time_offset},
        {"sup_deviation", std::vector<double>(c.sup_deviation.begin(), c.sup_deviation.end())},
        {"terminal_deviation",
         std::vector<double>(c.terminal_deviation.begin(), c.terminal_deviation.end())}};
  }
  ordered_json cfg = r.config.to_json();
  cfg["data"]["seed"] = r.config.data_seed();
  cfg["model"]["learning_rate"] = r.config.learning_rate();
  j["config"] = cfg;
  return j;
}

void write_outputs(const RunResult& result, const std::filesystem::path& prefix) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  const auto csv_path = std::filesystem::path(prefix.string() + ".csv");
  const auto json_path = std::filesystem::path(prefix.string() + ".json");
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + csv_path.string());
  write_csv(result.record, csv);
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw ConfigError("cannot write " + json_path.string());
  js << result_json(result).dump(2) << '\n';
}

std::vector<SuiteEntry> parse_suite(std::istream& in) {
  std::vector<SuiteEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string label;
    if (!(tokens >> label)) continue;
    if (label.find('=') != std::string::npos) {
      throw ConfigError("suite line " + std::to_string(lineno) +
                        ": expected a run label before the overrides, got '" + label + "'");
    }
    if (std::any_of(out.begin(), out.end(), [&](const SuiteEntry& e) { return e.label == label; })) {
      throw ConfigError("suite line " + std::to_string(lineno) + ": duplicate label '" + label + "'");
    }
    SuiteEntry e{label, lineno, {}};
    std::string tok;
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size()) {
        throw ConfigError("suite line " + std::to_string(lineno) + ": malformed override '" +
                          tok + "' (expected key=value)");
      }
      e.overrides.push_back(tok);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<SuiteEntry> load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open suite file " + path.string());
  return parse_suite(in);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<SuiteRow> run_suite(const std::vector<SuiteEntry>& entries, const RunConfig& base,
                                int jobs, const std::optional<std::filesystem::path>& out_dir) {
  std::vector<SuiteRow> rows(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const SuiteEntry& e = entries[i];
    SuiteRow& row = rows[i];
    row.label = e.label;
    try {
      RunConfig cfg = base;
      for (const auto& o : e.overrides) cfg.apply_override(o);
      cfg.output = out_dir ? (*out_dir / e.label).string() : std::string();
      row.loss = cfg.loss.name();
      std::string expected;
      for (Regime g : expected_regimes(cfg.loss)) {
        expected += (expected.empty() ? "" : "|") + std::string(to_string(g));
      }
      row.expected = expected;
      const RunResult r = run(cfg);
      if (r.status != RunStatus::Ok) {
        row.error = r.error;
      } else if (!r.verdict) {
        row.error = r.classification_error;
      } else {
        row.verdict = std::string(to_string(r.verdict->label));
        row.pass = r.verdict->matches_table1;
      }
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
  });
  return rows;
}

void print_summary(const std::vector<SuiteRow>& rows, std::ostream& os) {
  os << "label,loss,verdict,expected,result\n";
  for (const SuiteRow& r : rows) {
    const std::string result = !r.error.empty() ? "error: " + r.error : (r.pass ? "pass" : "fail");
    os << r.label << ',' << r.loss << ',' << r.verdict << ',' << r.expected << ',' << result
       << '\n';
  }
}

std::vector<SweepRow> sweep_initializations(const RunConfig& base,
                                            const std::vector<double>& init_scales, int jobs) {
  if (init_scales.empty()) throw ConfigError("sweep_initializations: no scales given");
  std::vector<SweepRow> rows(init_scales.size());
  parallel_for(init_scales.size(), jobs, [&](std::size_t i) {
    RunConfig cfg = base;
    cfg.model.init_scale = init_scales[i];
    if (!base.output.empty()) cfg.output = base.output + "_scale" + format_double(init_scales[i]);
    SweepRow& row = rows[i];
    row.init_scale = init_scales[i];
    row.result = run(cfg);
    if (row.result.verdict) {
      const RegimeEvidence& e = row.result.verdict->evidence;
      row.terminal = e.window_mean;
      row.terminal_mean = e.terminal_mean;
      row.terminal_cv = e.terminal_cv;
    } else if (!row.result.record.corr_eig.empty()) {
      row.terminal = row.result.record.corr_eig.back();
      row.terminal_mean = row.terminal.mean();
      const double var = (row.terminal.array() - row.terminal_mean).square().mean();
      row.terminal_cv = std::sqrt(var) / std::abs(row.terminal_mean);
    }
  });
  return rows;
}

}  // namespace isolab
