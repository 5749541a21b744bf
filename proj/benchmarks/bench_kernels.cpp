#include <benchmark/benchmark.h>

#include "rootconv/matview.hpp"
#include "rootconv/ops.hpp"
#include "rootconv/rng.hpp"
#include "rootconv/threading.hpp"

using namespace rootconv;

namespace {

Tensor random_tensor(Shape s, u64 seed) {
  Rng rng(seed);
  Tensor t(s);
  for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.normal());
  return t;
}

void BM_GemmSingle(benchmark::State& state) {
  const i64 dim = state.range(0);
  Tensor a = random_tensor(Shape(1, 1, dim, dim), 1);
  Tensor b = random_tensor(Shape(1, 1, dim, dim), 2);
  Tensor c(Shape(1, 1, dim, dim));
  for (auto _ : state) {
    gemm<float>(full_view(a, dim, dim), full_view(b, dim, dim), full_view(c, dim, dim), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * dim * dim * dim);
}
BENCHMARK(BM_GemmSingle)->Arg(16)->Arg(64)->Arg(256);

void BM_SmallGemmLooped(benchmark::State& state) {
  const i64 batch = state.range(0), dim = state.range(1);
  Tensor a = random_tensor(Shape(batch, 1, dim, dim), 3);
  Tensor b = random_tensor(Shape(batch, 1, dim, dim), 4);
  Tensor c(Shape(batch, 1, dim, dim));
  for (auto _ : state) {
    for (i64 i = 0; i < batch; ++i) {
      ConstMatView av{a.data(), a.numel(), i * dim * dim, dim, dim, dim};
      ConstMatView bv{b.data(), b.numel(), i * dim * dim, dim, dim, dim};
      MatView cv{c.data(), c.numel(), i * dim * dim, dim, dim, dim};
      gemm<float>(av, bv, cv, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * batch * dim * dim * dim);
}
BENCHMARK(BM_SmallGemmLooped)->Args({64, 16})->Args({256, 16})->Args({64, 32});

void BM_SmallGemmBatched(benchmark::State& state) {
  const i64 batch = state.range(0), dim = state.range(1);
  Tensor a = random_tensor(Shape(batch, 1, dim, dim), 3);
  Tensor b = random_tensor(Shape(batch, 1, dim, dim), 4);
  Tensor c(Shape(batch, 1, dim, dim));
  std::vector<GemmJob> jobs;
  for (i64 i = 0; i < batch; ++i) {
    ConstMatView av{a.data(), a.numel(), i * dim * dim, dim, dim, dim};
    ConstMatView bv{b.data(), b.numel(), i * dim * dim, dim, dim, dim};
    MatView cv{c.data(), c.numel(), i * dim * dim, dim, dim, dim};
    jobs.push_back({av, bv, cv, false});
  }
  for (auto _ : state) {
    gemm_batched<float>(jobs);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * batch * dim * dim * dim);
}
BENCHMARK(BM_SmallGemmBatched)->Args({64, 16})->Args({256, 16})->Args({64, 32});

void BM_GroupedConvForward(benchmark::State& state) {
  const i64 groups = state.range(0);
  Tensor x = random_tensor(Shape(8, 96, 16, 16), 5);
  ConvWeights w;
  w.groups = groups;
  w.filters = random_tensor(Shape(192, 96 / groups, 5, 5), 6);
  for (auto _ : state) {
    Tensor y = conv_forward(x, w, 1, 2);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 8 * 16 * 16 * 192 * 25 * (96 / groups));
}
BENCHMARK(BM_GroupedConvForward)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
