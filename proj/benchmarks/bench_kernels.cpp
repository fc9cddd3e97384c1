#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sktree/eval.hpp"
#include "sktree/mmd.hpp"
#include "sktree/sig_kernel.hpp"
#include "sktree/signature.hpp"
#include "sktree/tensor.hpp"

using namespace sktree;

namespace {

PiecewiseLinearPath random_path(std::mt19937_64& rng, int knots, int dim) {
  std::normal_distribution<double> step(0.0, 0.3);
  Eigen::VectorXd params(knots);
  PointMatrix values(knots, dim);
  values.row(0).setZero();
  params(0) = 0.0;
  for (int i = 1; i < knots; ++i) {
    params(i) = params(i - 1) + 0.1;
    for (int c = 0; c < dim; ++c) values(i, c) = values(i - 1, c) + step(rng);
  }
  return PiecewiseLinearPath(params, values);
}

void bm_signature_kernel_pde(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const PiecewiseLinearPath x = random_path(rng, 20, 5);
  const PiecewiseLinearPath y = random_path(rng, 20, 5);
  const BaseKernel base = BaseKernel::rbf(1.0);
  const PdeGrid grid{static_cast<int>(state.range(0))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(signature_kernel(x, y, base, grid));
  }
}
BENCHMARK(bm_signature_kernel_pde)->Arg(0)->Arg(1)->Arg(2)->Arg(3);

void bm_chen_product(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int dim = static_cast<int>(state.range(0));
  const TruncatedTensor a =
      truncated_signature(random_path(rng, 6, dim), 6);
  const TruncatedTensor b =
      truncated_signature(random_path(rng, 6, dim), 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chen_product(a, b));
  }
}
BENCHMARK(bm_chen_product)->Arg(2)->Arg(3)->Arg(4);

void bm_truncated_signature(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const PiecewiseLinearPath x =
      random_path(rng, static_cast<int>(state.range(0)), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncated_signature(x, 5));
  }
}
BENCHMARK(bm_truncated_signature)->Arg(8)->Arg(32)->Arg(128);

void bm_gram_assembly(benchmark::State& state) {
  const LabeledDataset ds = generate_synthetic(
      static_cast<int>(state.range(0)) / 2, 5, "separable");
  MmdConfig config;
  config.base = BaseKernel::rbf(1.0);
  config.grid.refinement = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram(ds.trees, 1.0, config));
  }
}
BENCHMARK(bm_gram_assembly)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
