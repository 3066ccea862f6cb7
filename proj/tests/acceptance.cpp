// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "isolab/analysis.hpp"
#include "isolab/errors.hpp"
#include "isolab/experiment.hpp"
#include "isolab/theory.hpp"
#include "support.hpp"

namespace {

using namespace isolab;
using test::central_difference;
using test::normal_vector;
using test::relative_error;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const std::vector<LossSpec> kTable1 = {
    {Metric::Euclidean, Variant::Standard},   {Metric::Euclidean, Variant::NoStopGrad},
    {Metric::Euclidean, Variant::NoPredictor}, {Metric::Euclidean, Variant::Iso},
    {Metric::Cosine, Variant::Standard},       {Metric::Cosine, Variant::NoStopGrad},
    {Metric::Cosine, Variant::NoPredictor},    {Metric::Cosine, Variant::Iso},
};
constexpr int kSeeds = 5;

std::vector<LossSpec> all_loss_specs() {
  std::vector<LossSpec> out;
  for (Metric m : {Metric::Euclidean, Metric::Cosine}) {
    for (Variant v : {Variant::Standard, Variant::NoStopGrad, Variant::NoPredictor, Variant::Iso,
                      Variant::IsoAlternative}) {
      if (m == Metric::Cosine && v == Variant::IsoAlternative) continue;
      for (bool sym : {false, true}) out.push_back({m, v, sym});
    }
  }
  return out;
}

std::string verdict_of(const RunResult& r) {
  if (r.status != RunStatus::Ok) return "error";
  if (!r.verdict) return "unclassified";
  return std::string(to_string(r.verdict->label));
}

// results[row * kSeeds + seed]
std::vector<RunResult> run_table(Activation act) {
  std::vector<RunResult> results(kTable1.size() * kSeeds);
  parallel_for(results.size(), jobs(), [&](std::size_t i) {
    RunConfig c;
    c.loss = kTable1[i / kSeeds];
    c.seed = static_cast<std::uint64_t>(i % kSeeds + 1);
    c.model.activation = act;
    results[i] = run(c);
  });
  return results;
}

bool table_passes(const std::vector<RunResult>& results, std::string& detail) {
  bool ok = true;
  std::ostringstream os;
  for (std::size_t row = 0; row < kTable1.size(); ++row) {
    int matched = 0;
    os << kTable1[row].name() << "[";
    for (int s = 0; s < kSeeds; ++s) {
      const RunResult& r = results[row * kSeeds + static_cast<std::size_t>(s)];
      bool pass = r.matches_table1();
      if (pass && kTable1[row].metric == Metric::Cosine &&
          kTable1[row].variant == Variant::NoPredictor) {
        pass = eigen_sum_drift(r.record) < 0.05;
      }
      matched += pass;
      os << (s ? " " : "") << verdict_of(r);
    }
    os << "] " << matched << "/" << kSeeds << "; ";
    ok = ok && matched == kSeeds;
  }
  detail = os.str();
  return ok;
}

void table1_criterion(const std::vector<RunResult>& results) {
  std::string detail;
  bool ok = table_passes(results, detail);
  std::ostringstream drift;
  drift << "cosine/no_predictor eigen_sum_drift:";
  for (int s = 0; s < kSeeds; ++s) {
    drift << ' ' << eigen_sum_drift(results[6 * kSeeds + static_cast<std::size_t>(s)].record);
  }
  report("table1_regime_suite", ok, detail + drift.str());
}

void isotropy_criterion(const std::vector<RunResult>& results) {
  bool ok = true;
  std::ostringstream os;
  for (Metric metric : {Metric::Euclidean, Metric::Cosine}) {
    const std::size_t standard = metric == Metric::Euclidean ? 0 : 4;
    const std::size_t iso = standard + 3;
    int wins = 0;
    os << to_string(metric) << " spreads iso/standard:";
    for (std::size_t s = 0; s < kSeeds; ++s) {
      const SpectrumScale scale = natural_scale({metric});
      const long long a = convergence_spread(results[iso * kSeeds + s].record, 0.05,
                                             EigenSeries::Correlation, scale);
      const long long b = convergence_spread(results[standard * kSeeds + s].record, 0.05,
                                             EigenSeries::Correlation, scale);
      wins += a < b;
      os << ' ' << a << '/' << b;
    }
    os << " (" << wins << "/5); ";
    ok = ok && wins >= 4;
  }
  report("isotropy_speedup", ok, os.str());
}

void initialization_criterion() {
  const std::vector<double> scales = {0.5, 1.0, 2.0};
  std::ostringstream os;
  RunConfig euc;
  euc.seed = 1;
  bool euc_ok = true;
  os << "euclidean max|terminal-1|:";
  for (const SweepRow& row : sweep_initializations(euc, scales, jobs())) {
    const double dev = row.terminal.size() ? (row.terminal.array() - 1.0).abs().maxCoeff() : 1e9;
    euc_ok = euc_ok && dev < 0.05;
    os << ' ' << dev;
  }
  RunConfig cos;
  cos.seed = 1;
  cos.loss = {Metric::Cosine, Variant::Standard};
  const auto rows = sweep_initializations(cos, scales, jobs());
  bool cos_ok = true;
  os << "; cosine mean(cv):";
  for (const SweepRow& row : rows) {
    cos_ok = cos_ok && row.terminal.size() > 0 && row.terminal_cv < 0.05;
    os << ' ' << row.terminal_mean << '(' << row.terminal_cv << ')';
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double a = rows[i].terminal_mean, b = rows[j].terminal_mean;
      cos_ok = cos_ok && std::abs(a - b) > 0.1 * std::min(std::abs(a), std::abs(b));
    }
  }
  report("initialization_study", euc_ok && cos_ok, os.str());
}

void relu_criterion(const std::vector<RunResult>& linear) {
  const auto relu = run_table(Activation::Relu);
  std::string detail;
  bool ok = table_passes(relu, detail);
  int same = 0;
  for (std::size_t i = 0; i < relu.size(); ++i) same += verdict_of(relu[i]) == verdict_of(linear[i]);
  report("relu_table1_suite", ok,
         detail + "labels equal to linear runs: " + std::to_string(same) + "/" +
             std::to_string(relu.size()));
}

void gradient_criterion() {
  Rng rng(90210);
  double worst_loss = 0.0, worst_chain = 0.0;
  int min_loss_instances = 1 << 30, min_chain_instances = 1 << 30;
  for (const LossSpec& s : all_loss_specs()) {
    int n = 0;
    for (Eigen::Index m : {Eigen::Index{2}, Eigen::Index{10}}) {
      for (int k = 0; k < 30; ++k, ++n) {
        const Vector z1 = normal_vector(m, rng), z2 = normal_vector(m, rng);
        const Matrix wp = test::random_psd(m, rng).matrix();
        const LossGrads g = eval_loss_and_grads(s, z1, z2, wp);
        const Vector fd1 = central_difference(
            [&](const Vector& x) { return eval_surrogate(s, x, z2, z1, z2, wp); }, z1);
        const Vector fd2 = central_difference(
            [&](const Vector& x) { return eval_surrogate(s, z1, x, z1, z2, wp); }, z2);
        worst_loss = std::max(worst_loss, relative_error(g.grad_z1, fd1));
        if (fd2.norm() > 0.0 || g.grad_z2.norm() > 0.0) {
          worst_loss = std::max(worst_loss, relative_error(g.grad_z2, fd2));
        }
      }
    }
    min_loss_instances = std::min(min_loss_instances, n);

    for (Activation act : {Activation::Linear, Activation::Relu}) {
      int checked = 0;
      for (int k = 0; checked < 50 && k < 500; ++k) {
        SiameseState st;
        st.online = EncoderParams::random(3, 2, 1.0, act, rng);
        st.predictor = PredictorState::closed_form(3, 0.5, 0.5);
        st.learning_rate = 0.1;
        const AugmentedBatch batch = sample_batch(test::normal_matrix(2, 4, rng), 0.1, rng);
        if (s.uses_predictor()) {
          st.predictor = refresh_predictor(st.predictor, st.online.forward_batch(batch.x1));
        }
        const Matrix analytic = encoder_gradient(st, batch, s);
        const Matrix& w0 = st.online.weights;
        const auto at = [&](Eigen::Index i, Eigen::Index j, double d) {
          Matrix w = w0;
          w(i, j) += d;
          return frozen_batch_loss(st, w, w0, batch, s);
        };
        Matrix fd(w0.rows(), w0.cols());
        const double h = 1e-4;  // fourth-order stencil
        for (Eigen::Index i = 0; i < w0.rows(); ++i) {
          for (Eigen::Index j = 0; j < w0.cols(); ++j) {
            fd(i, j) = (at(i, j, -2 * h) - 8 * at(i, j, -h) + 8 * at(i, j, h) - at(i, j, 2 * h)) /
                       (12.0 * h);
          }
        }
        if (analytic.norm() < 1e-8 && fd.norm() < 1e-8) continue;  // stationary, below FD resolution
        if (act == Activation::Relu &&
            std::min((w0 * batch.x1).cwiseAbs().minCoeff(), (w0 * batch.x2).cwiseAbs().minCoeff()) < 1e-3) {
          continue;  // ReLU kink within the stencil
        }
        worst_chain = std::max(worst_chain, (analytic - fd).norm() / std::max(fd.norm(), 1e-8));
        ++checked;
      }
      min_chain_instances = std::min(min_chain_instances, checked);
    }
  }
  std::ostringstream os;
  os << "loss max rel err " << worst_loss << " (>= " << min_loss_instances
     << " instances per variant); chain rule max rel err " << worst_chain << " (>= "
     << min_chain_instances << " instances per variant and activation)";
  report("finite_difference_gradients",
         worst_loss < 1e-5 && worst_chain < 1e-5 && min_loss_instances >= 50 &&
             min_chain_instances >= 50,
         os.str());
}

void identities_criterion() {
  Rng rng(4242);
  double eigenbasis = 0.0, iso_value = 0.0, ortho = 0.0, rhs = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index m = 1 + k % 10;
    const SymMatrix c = test::random_psd(m, rng);
    const SymEigDecomp eig = sym_eig(c);
    const Vector z1 = normal_vector(m, rng), z2 = normal_vector(m, rng);
    const Vector zh1 = eig.basis.transpose() * z1, zh2 = eig.basis.transpose() * z2;
    for (Metric metric : {Metric::Euclidean, Metric::Cosine}) {
      eigenbasis = std::max(eigenbasis, std::abs(eval_loss_and_grads({metric}, z1, z2, c.matrix()).value -
                                       eval_loss_eigenbasis({metric}, zh1, zh2, eig.eigenvalues)));
    }
    for (bool sym : {false, true}) {
      iso_value = std::max(
          iso_value,
          std::abs(eval_loss_and_grads({Metric::Euclidean, Variant::Iso, sym}, z1, z2, c.matrix()).value -
                   eval_loss_and_grads({Metric::Euclidean, Variant::Standard, sym}, z1, z2, c.matrix()).value));
    }
    if (m >= 2) {
      for (Variant v : {Variant::Standard, Variant::NoPredictor}) {
        const Vector g = eval_loss_and_grads({Metric::Cosine, v}, z1, z2, c.matrix()).grad_z1;
        ortho = std::max(ortho, std::abs(g.dot(z1)) / (g.norm() * z1.norm()));
      }
    }
    const double eta = 0.05 + rng.uniform();
    const Vector grad = eig.basis.transpose() *
                        eval_loss_and_grads({Metric::Cosine}, z1, z2, c.matrix()).grad_z1;
    rhs = std::max(rhs, (cos_exact_rhs(zh1, zh2, eig.eigenvalues, eta) + eta * grad).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "eigenbasis loss " << eigenbasis << "; iso value " << iso_value << "; cosine grad.z1 (relative) "
     << ortho << "; cosine ODE rhs " << rhs;
  report("analytic_identities", eigenbasis <= 1e-12 && iso_value <= 1e-12 && ortho <= 1e-10 && rhs <= 1e-10,
         os.str());
}

void ntk_criterion() {
  Rng rng(777);
  double identity = 0.0, rotation = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index m = 2 + k % 9, n = 3 + k % 13;
    const EncoderParams enc = EncoderParams::random(m, n, 1.0, Activation::Linear, rng);
    const Vector xi = normal_vector(n, rng), xj = normal_vector(n, rng);
    const Matrix plain = ntk_block(enc, xi, xj, Matrix::Identity(m, m));
    identity = std::max(identity, (plain - xi.dot(xj) * Matrix::Identity(m, m)).cwiseAbs().maxCoeff());
    const Matrix rotated = ntk_block(enc, xi, xj, test::random_rotation(m, rng));
    rotation = std::max(rotation, (rotated - plain).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "20 instances; max |K - (xi.xj)I| " << identity << "; max rotation change " << rotation;
  report("ntk_linear_encoder", identity <= 1e-12 && rotation <= 1e-12, os.str());
}

void theory_criterion() {
  std::ostringstream os;
  bool ok = true;
  for (const LossSpec& loss : kTable1) {
    if (!has_table1_rhs(loss)) continue;
    Rng rng(1000 + static_cast<std::uint64_t>(loss.metric) * 10 + static_cast<std::uint64_t>(loss.variant));
    int matched = 0;
    std::string first_miss;
    for (int k = 0; k < 20; ++k) {
      Vector l0(10);
      for (Eigen::Index m = 0; m < l0.size(); ++m) l0(m) = 0.05 + 2.95 * rng.uniform();
      const TheoryTrajectory t = integrate(
          [&](const Vector& l) { return table1_eigen_rhs(loss, l, 0.1); }, l0, 0.01, 20000, 20);
      std::string label;
      try {
        const RegimeVerdict v = classify(to_record(t), loss);
        label = std::string(to_string(v.label));
        matched += v.matches_table1;
        if (!v.matches_table1 && first_miss.empty()) first_miss = label;
      } catch (const Error& e) {
        if (first_miss.empty()) first_miss = "unclassified";
      }
    }
    os << loss.name() << ' ' << matched << "/20" << (first_miss.empty() ? "" : " (miss: " + first_miss + ")")
       << "; ";
    ok = ok && matched == 20;
  }

  RunConfig c;
  c.seed = 1;
  c.theory.overlay = true;
  const RunResult r = run(c);
  const double dev = r.comparison ? r.comparison->max_terminal_deviation() : 1e9;
  os << "euclidean/standard compare_theory max terminal deviation " << dev;
  report("theory_integration", ok && dev < 0.05, os.str());
}

void alignment_criterion() {
  const std::vector<double> noises = {0.01, 1.0};
  std::vector<double> top3(noises.size(), 0.0), start(noises.size(), 0.0);
  parallel_for(noises.size(), jobs(), [&](std::size_t i) {
    RunConfig c;
    c.seed = 1;
    c.loss = {Metric::Cosine, Variant::Standard};
    c.model.predictor = PredictorMode::Trainable;
    c.model.predictor_noise = noises[i];
    const RunResult r = run(c);
    if (r.status != RunStatus::Ok || r.record.alignment.empty()) return;
    top3[i] = r.record.alignment.back().head(3).mean();
    start[i] = r.record.alignment.front().head(3).mean();
  });
  std::ostringstream os;
  bool ok = true;
  for (std::size_t i = 0; i < noises.size(); ++i) {
    os << "predictor_noise " << noises[i] << ": top-3 alignment " << start[i] << " -> " << top3[i] << "; ";
    ok = ok && top3[i] > 0.9;
  }
  report("eigenspace_alignment", ok, os.str());
}

void linalg_criterion() {
  Rng rng(31337);
  double recon = 0.0, ortho = 0.0, trace = 0.0, semigroup = 0.0;
  bool sorted = true;
  for (int k = 0; k < 150; ++k) {
    const Eigen::Index n = 2 + k % 15;
    const SymMatrix a = test::random_symmetric(n, rng);
    const SymEigDecomp e = sym_eig(a);
    const Matrix r = e.basis * e.eigenvalues.asDiagonal() * e.basis.transpose();
    recon = std::max(recon, (r - a.matrix()).cwiseAbs().maxCoeff() /
                                std::max(1.0, a.matrix().cwiseAbs().maxCoeff()));
    ortho = std::max(ortho, (e.basis.transpose() * e.basis - Matrix::Identity(n, n)).cwiseAbs().maxCoeff());
    trace = std::max(trace, std::abs(e.eigenvalues.sum() - a.matrix().trace()));
    for (Eigen::Index i = 1; i < n; ++i) sorted = sorted && e.eigenvalues(i - 1) >= e.eigenvalues(i);

    const SymMatrix p = test::random_psd(n, rng);
    const double alpha = rng.uniform() * 1.5, beta = rng.uniform() * 1.5;
    semigroup = std::max(semigroup, (matrix_power(p, alpha).matrix() * matrix_power(p, beta).matrix() -
                                     matrix_power(p, alpha + beta).matrix())
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  const auto rk4_error = [](double dt, long long steps) {
    const TheoryTrajectory t =
        integrate([](const Vector& x) { return Vector(-x); }, Vector::Ones(1), dt, steps);
    return std::abs(t.states.back()(0) - std::exp(-1.0));
  };
  const double ratio = rk4_error(0.1, 10) / rk4_error(0.05, 20);
  std::ostringstream os;
  os << "150 matrices dims 2-16: reconstruction " << recon << ", orthogonality " << ortho << ", trace "
     << trace << (sorted ? ", sorted" : ", UNSORTED") << "; semigroup " << semigroup
     << "; RK4 error ratio " << ratio;
  report("linalg_suite",
         recon <= 1e-9 && ortho <= 1e-10 && trace <= 1e-9 && sorted && semigroup <= 1e-8 &&
             std::abs(ratio - 16.0) < 1.0,
         os.str());
}

template <class F>
void timed(const char* what, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    f();
  } catch (const std::exception& e) {
    report(what, false, std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "[%s took %.1f s]\n", what, s);
}

}  // namespace

int main() {
  std::vector<RunResult> linear;
  timed("table1_regime_suite", [&] {
    linear = run_table(Activation::Linear);
    table1_criterion(linear);
  });
  timed("isotropy_speedup", [&] { isotropy_criterion(linear); });
  timed("initialization_study", [] { initialization_criterion(); });
  timed("relu_table1_suite", [&] { relu_criterion(linear); });
  timed("finite_difference_gradients", [] { gradient_criterion(); });
  timed("analytic_identities", [] { identities_criterion(); });
  timed("ntk_linear_encoder", [] { ntk_criterion(); });
  timed("theory_integration", [] { theory_criterion(); });
  timed("eigenspace_alignment", [] { alignment_criterion(); });
  timed("linalg_suite", [] { linalg_criterion(); });
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
