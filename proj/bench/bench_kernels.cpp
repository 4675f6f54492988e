#include <benchmark/benchmark.h>
#include <omp.h>

#include "lulc/kernels.hpp"
#include "lulc/rng.hpp"

using namespace lulc;

namespace {

Tensor random(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Desk-scale gated-block shapes: batch 64 of 16x16, 32 -> 64 channels.
struct Case {
  Tensor x = random({64, 32, 16, 16}, 1);
  Tensor w = random({64, 32, 3, 3}, 2);
  Tensor b = random({64}, 3);
  Tensor dy = random({64, 64, 16, 16}, 4);
};

const Tensor* const kNoMask = nullptr;

// 1, 2, 4, ... up to the processor count; more threads than cores only
// measures barrier spinning.
void thread_counts(benchmark::internal::Benchmark* b) {
  for (int t = 1; t < omp_get_num_procs(); t *= 2) b->Arg(t);
  b->Arg(omp_get_num_procs());
}

void set_threads(benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(0))); }

void BM_ForwardParallel(benchmark::State& state) {
  set_threads(state);
  Case c;
  Tensor y;
  for (auto _ : state) {
    kernels::conv2d_forward(c.x, c.w, &c.b, kNoMask, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_ForwardReference(benchmark::State& state) {
  Case c;
  Tensor y;
  for (auto _ : state) {
    kernels::reference::conv2d_forward(c.x, c.w, &c.b, kNoMask, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_BackwardParallel(benchmark::State& state) {
  set_threads(state);
  Case c;
  for (auto _ : state) {
    Tensor dx(c.x.shape()), dw(c.w.shape()), db(c.b.shape());
    kernels::conv2d_backward(c.x, c.w, kNoMask, c.dy, &dx, &dw, &db);
    benchmark::DoNotOptimize(dw.data());
  }
}

void BM_BackwardReference(benchmark::State& state) {
  Case c;
  for (auto _ : state) {
    Tensor dx(c.x.shape()), dw(c.w.shape()), db(c.b.shape());
    kernels::reference::conv2d_backward(c.x, c.w, kNoMask, c.dy, &dx, &dw, &db);
    benchmark::DoNotOptimize(dw.data());
  }
}

}  // namespace

BENCHMARK(BM_ForwardParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ForwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackwardReference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
