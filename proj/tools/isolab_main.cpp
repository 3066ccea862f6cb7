// isolab: command-line driver for runs, suites, initialization sweeps and
// theory integration.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "isolab/analysis.hpp"
#include "isolab/errors.hpp"
#include "isolab/experiment.hpp"
#include "isolab/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitMismatch = 4;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw isolab::ConfigError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw isolab::ConfigError("empty list");
  return out;
}

isolab::RunConfig base_config(const std::string& path, const std::vector<std::string>& sets) {
  isolab::RunConfig cfg = path.empty() ? isolab::RunConfig{} : isolab::RunConfig::load(path);
  for (const auto& s : sets) cfg.apply_override(s);
  cfg.validate();
  return cfg;
}

void print_verdict(const isolab::RunResult& r, std::ostream& os) {
  os << "loss: " << r.config.loss.name() << "\n";
  os << "recorded: " << r.record.size() << " entries"
     << (r.record.blow_up ? " (stopped at blow-up)" : "") << "\n";
  if (r.status != isolab::RunStatus::Ok) os << "error: " << r.error << "\n";
  if (r.verdict) {
    os << "verdict: " << isolab::to_string(r.verdict->label)
       << (r.verdict->matches_table1 ? " (matches)" : " (does not match)") << "\n";
    os << "evidence: " << r.verdict->evidence.summary() << "\n";
  } else if (!r.classification_error.empty()) {
    os << "verdict: none (" << r.classification_error << ")\n";
  }
  if (r.comparison) {
    os << "theory: max terminal deviation " << r.comparison->max_terminal_deviation()
       << ", max sup deviation " << r.comparison->max_sup_deviation() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form-predictor non-contrastive learning laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string output;
  bool print_config = false;
  auto* run = app.add_subcommand("run", "Train one configuration and classify it");
  run->add_option("--config", config_path, "JSON config file (defaults when omitted)");
  run->add_option("--set", sets, "Override a config key, e.g. --set loss.variant=iso");
  run->add_option("--output", output, "Output prefix for .csv and .json");
  run->add_flag("--print-config", print_config, "Print the resolved config and exit");

  std::string suite_path;
  int jobs = 1;
  std::string out_dir;
  bool check = false;
  auto* suite = app.add_subcommand("suite", "Run every line of a suite file");
  suite->add_option("--file", suite_path, "Suite file")->required();
  suite->add_option("--config", config_path, "Base config file");
  suite->add_option("--set", sets, "Override applied to every row before its own");
  suite->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  suite->add_option("--out", out_dir, "Directory for per-run outputs");
  suite->add_flag("--check", check, "Exit with 4 when any row fails or errors");

  std::string scales_text;
  auto* sweep = app.add_subcommand("sweep-init", "Repeat a run across init scales");
  sweep->add_option("--config", config_path, "Base config file");
  sweep->add_option("--set", sets, "Override a config key");
  sweep->add_option("--scales", scales_text, "Comma-separated init scales")->required();
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--output", output, "Output prefix; each scale appends _scale<s>");

  std::string loss_text, lambda_text;
  double rate = 0.1, dt = 0.01;
  long long steps = 100000, every = 50;
  auto* theory = app.add_subcommand("theory", "Integrate the eigenvalue ODE of a loss");
  theory->add_option("--loss", loss_text, "metric/variant")->required();
  theory->add_option("--lambda0", lambda_text, "Comma-separated initial eigenvalues")->required();
  theory->add_option("--rate", rate, "Rate prefactor");
  theory->add_option("--dt", dt, "RK4 step");
  theory->add_option("--steps", steps, "Number of RK4 steps");
  theory->add_option("--record-every", every, "Keep every k-th state");
  theory->add_option("--output", output, "Write the trajectory as <prefix>.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      isolab::RunConfig cfg = base_config(config_path, sets);
      if (!output.empty()) cfg.output = output;
      if (print_config) {
        std::cout << cfg.to_json().dump(2) << "\n";
        return kExitOk;
      }
      const isolab::RunResult r = isolab::run(cfg);
      print_verdict(r, std::cout);
      return r.status == isolab::RunStatus::Ok ? kExitOk : kExitNumerical;
    }
    if (suite->parsed()) {
      const isolab::RunConfig cfg = base_config(config_path, sets);
      const auto entries = isolab::load_suite(suite_path);
      std::optional<std::filesystem::path> dir;
      if (!out_dir.empty()) dir = out_dir;
      const auto rows = isolab::run_suite(entries, cfg, jobs, dir);
      isolab::print_summary(rows, std::cout);
      const bool all_pass =
          std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
      return check && !all_pass ? kExitMismatch : kExitOk;
    }
    if (sweep->parsed()) {
      isolab::RunConfig cfg = base_config(config_path, sets);
      if (!output.empty()) cfg.output = output;
      const auto rows = isolab::sweep_initializations(cfg, parse_list(scales_text), jobs);
      std::cout << "init_scale,verdict,terminal_mean,terminal_cv,terminal\n";
      for (const auto& row : rows) {
        std::cout << row.init_scale << ','
                  << (row.result.verdict ? isolab::to_string(row.result.verdict->label)
                                         : std::string_view("none"))
                  << ',' << row.terminal_mean << ',' << row.terminal_cv << ',';
        for (Eigen::Index k = 0; k < row.terminal.size(); ++k) {
          std::cout << (k ? " " : "") << row.terminal(k);
        }
        std::cout << "\n";
      }
      return kExitOk;
    }
    if (theory->parsed()) {
      const isolab::LossSpec loss = isolab::LossSpec::parse(loss_text);
      const auto l0 = parse_list(lambda_text);
      const isolab::Vector x0 = Eigen::Map<const isolab::Vector>(l0.data(), l0.size());
      const auto traj = isolab::integrate(
          [&](const isolab::Vector& l) { return isolab::table1_eigen_rhs(loss, l, rate); }, x0,
          dt, steps, every, isolab::StateKind::Eigenvalues, loss.name());
      const isolab::TrajectoryRecord rec = isolab::to_record(traj);
      if (!output.empty()) {
        std::ofstream csv(output + ".csv", std::ios::binary);
        isolab::write_csv(rec, csv);
      }
      std::cout << "final:";
      for (Eigen::Index k = 0; k < traj.states.back().size(); ++k) {
        std::cout << ' ' << traj.states.back()(k);
      }
      std::cout << (traj.diverged ? " (diverged)" : "") << "\n";
      try {
        const auto v = isolab::classify(rec, loss);
        std::cout << "verdict: " << isolab::to_string(v.label)
                  << (v.matches_table1 ? " (matches)" : " (does not match)") << "\n";
      } catch (const isolab::Error& e) {
        std::cout << "verdict: none (" << e.what() << ")\n";
      }
      return kExitOk;
    }
  } catch (const isolab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const isolab::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
