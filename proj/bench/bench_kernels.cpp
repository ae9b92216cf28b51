// Parallel dense kernels vs the serial reference, at the training shapes
// (batch 64, 512 -> 1024 -> 1024 -> C).

#include <benchmark/benchmark.h>

#include <vector>

#include "clare/dynnan.hpp"
#include "clare/kernels.hpp"
#include "clare/random.hpp"

namespace {

struct Problem {
  std::size_t rows, in, out;
  std::vector<float> x, w, b, y, gy, gx, gw, gb;

  Problem(std::size_t rows_, std::size_t in_, std::size_t out_)
      : rows(rows_), in(in_), out(out_), x(rows * in), w(out * in), b(out), y(rows * out),
        gy(rows * out), gx(rows * in), gw(out * in), gb(out) {
    clare::Rng rng(7);
    for (auto* v : {&x, &w, &b, &gy}) {
      for (auto& e : *v) e = static_cast<float>(rng.uniform() - 0.5);
    }
  }
};

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  Problem p(64, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      clare::kernels::affine_forward<float>(p.x, p.rows, p.w, p.b, p.y);
    } else {
      clare::kernels::serial::affine_forward<float>(p.x, p.rows, p.w, p.b, p.y);
    }
    benchmark::DoNotOptimize(p.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(p.rows * p.in * p.out));
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  Problem p(64, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      clare::kernels::affine_backward_input<float>(p.gy, p.rows, p.w, p.gx);
    } else {
      clare::kernels::serial::affine_backward_input<float>(p.gy, p.rows, p.w, p.gx);
    }
    benchmark::DoNotOptimize(p.gx.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(p.rows * p.in * p.out));
}

template <bool Parallel>
void BM_BackwardParams(benchmark::State& state) {
  Problem p(64, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      clare::kernels::affine_backward_params<float>(p.gy, p.x, p.rows, p.gw, p.gb);
    } else {
      clare::kernels::serial::affine_backward_params<float>(p.gy, p.x, p.rows, p.gw, p.gb);
    }
    benchmark::DoNotOptimize(p.gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(p.rows * p.in * p.out));
}

void BM_TrainStep(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  std::vector<clare::ClassId> ids(classes);
  for (std::size_t c = 0; c < classes; ++c) ids[c] = static_cast<clare::ClassId>(c);
  auto model = clare::DynNanModel::init(512, ids, 3);
  clare::Rng rng(5);
  std::vector<float> batch(64 * 512);
  for (auto& v : batch) v = static_cast<float>(rng.normal());
  std::vector<clare::MixedTarget> targets(64);
  for (std::size_t r = 0; r < 64; ++r) targets[r] = {r % classes, r % classes, 1.0};
  for (auto _ : state) {
    const auto pass = model.forward(batch, 64);
    auto result = model.loss_and_grad(pass, targets, 1e-4);
    benchmark::DoNotOptimize(result.loss);
  }
}

}  // namespace

#define SHAPES Args({512, 1024})->Args({1024, 1024})->Args({1024, 100})
BENCHMARK(BM_Forward<true>)->SHAPES;
BENCHMARK(BM_Forward<false>)->SHAPES;
BENCHMARK(BM_BackwardInput<true>)->SHAPES;
BENCHMARK(BM_BackwardInput<false>)->SHAPES;
BENCHMARK(BM_BackwardParams<true>)->SHAPES;
BENCHMARK(BM_BackwardParams<false>)->SHAPES;
BENCHMARK(BM_TrainStep)->Arg(10)->Arg(100);

BENCHMARK_MAIN();
