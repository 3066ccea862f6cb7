#include <benchmark/benchmark.h>

#include "isolab/data.hpp"
#include "isolab/experiment.hpp"
#include "isolab/linalg.hpp"
#include "isolab/network.hpp"
#include "isolab/theory.hpp"

namespace {

using namespace isolab;

SymMatrix random_psd(Eigen::Index n, Rng& rng) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  return SymMatrix(a * a.transpose() / static_cast<double>(n) + 0.1 * Matrix::Identity(n, n));
}

void BM_SymEig(benchmark::State& state) {
  Rng rng(1);
  const SymMatrix a = random_psd(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(a));
}
BENCHMARK(BM_SymEig)->Arg(4)->Arg(10)->Arg(32)->Arg(64);

void BM_MatrixPower(benchmark::State& state) {
  Rng rng(2);
  const SymMatrix a = random_psd(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(matrix_power(a, 0.5));
}
BENCHMARK(BM_MatrixPower)->Arg(10)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  RunConfig config;
  config.loss.metric = state.range(0) ? Metric::Cosine : Metric::Euclidean;
  DataSpec data = config.data;
  data.seed = config.data_seed();
  const Matrix base = make_dataset(data);
  const SiameseState s = initial_state(config);
  Rng rng(3);
  const AugmentedBatch batch = sample_batch(base, config.data.aug_sigma, rng);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s, batch, config.loss, true, &base));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_IntegrateTable1(benchmark::State& state) {
  const LossSpec loss{Metric::Cosine, Variant::Standard};
  const Vector l0 = Vector::LinSpaced(10, 0.1, 2.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate(
        [&](const Vector& l) { return table1_eigen_rhs(loss, l, 0.1); }, l0, 0.01, 10000, 50));
  }
}
BENCHMARK(BM_IntegrateTable1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
