// Serial reference vs OpenMP kernels at the shapes the MNIST split network
// actually runs. Build target: otasim_bench.

#include <benchmark/benchmark.h>

#include "otasim/kernels.hpp"
#include "otasim/rng.hpp"

using namespace otasim;

namespace {

Tensor rand_tensor(std::vector<int64_t> shape, uint64_t seed) {
  RngStream rng(seed, {0});
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward_Serial(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 1, 28, 28}, 1);
  Tensor w = rand_tensor({10, 1, 5, 5}, 2);
  Tensor b = rand_tensor({10}, 3);
  for (auto _ : state) {
    Tensor out = kernels::serial::conv2d_forward(in, w, b, 1, 0);
    benchmark::DoNotOptimize(out.data.data());
  }
}

void BM_Conv2dForward_OMP(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 1, 28, 28}, 1);
  Tensor w = rand_tensor({10, 1, 5, 5}, 2);
  Tensor b = rand_tensor({10}, 3);
  for (auto _ : state) {
    Tensor out = kernels::conv2d_forward(in, w, b, 1, 0);
    benchmark::DoNotOptimize(out.data.data());
  }
}

void BM_Conv2dBackward_Serial(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 1, 28, 28}, 1);
  Tensor w = rand_tensor({10, 1, 5, 5}, 2);
  Tensor dout = rand_tensor({batch, 10, 24, 24}, 4);
  for (auto _ : state) {
    auto g = kernels::serial::conv2d_backward(in, w, dout, 1, 0);
    benchmark::DoNotOptimize(g.d_weights.data.data());
  }
}

void BM_Conv2dBackward_OMP(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 1, 28, 28}, 1);
  Tensor w = rand_tensor({10, 1, 5, 5}, 2);
  Tensor dout = rand_tensor({batch, 10, 24, 24}, 4);
  for (auto _ : state) {
    auto g = kernels::conv2d_backward(in, w, dout, 1, 0);
    benchmark::DoNotOptimize(g.d_weights.data.data());
  }
}

void BM_DenseForward_Serial(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 5760}, 1);
  Tensor w = rand_tensor({50, 5760}, 2);
  Tensor b = rand_tensor({50}, 3);
  for (auto _ : state) {
    Tensor out = kernels::serial::dense_forward(in, w, b);
    benchmark::DoNotOptimize(out.data.data());
  }
}

void BM_DenseForward_OMP(benchmark::State& state) {
  const int64_t batch = state.range(0);
  Tensor in = rand_tensor({batch, 5760}, 1);
  Tensor w = rand_tensor({50, 5760}, 2);
  Tensor b = rand_tensor({50}, 3);
  for (auto _ : state) {
    Tensor out = kernels::dense_forward(in, w, b);
    benchmark::DoNotOptimize(out.data.data());
  }
}

}  // namespace

BENCHMARK(BM_Conv2dForward_Serial)->Arg(8)->Arg(32);
BENCHMARK(BM_Conv2dForward_OMP)->Arg(8)->Arg(32);
BENCHMARK(BM_Conv2dBackward_Serial)->Arg(8)->Arg(32);
BENCHMARK(BM_Conv2dBackward_OMP)->Arg(8)->Arg(32);
BENCHMARK(BM_DenseForward_Serial)->Arg(8)->Arg(32);
BENCHMARK(BM_DenseForward_OMP)->Arg(8)->Arg(32);

BENCHMARK_MAIN();
