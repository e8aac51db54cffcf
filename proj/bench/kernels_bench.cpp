// Serial reference kernels against the OpenMP versions, plus one full
// forward/backward pass of the desk model.

#include <benchmark/benchmark.h>

#include <random>

#include "sigwav/kernels.hpp"
#include "sigwav/model.hpp"
#include "sigwav/training.hpp"

using namespace sigwav;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

kernels::ConvGeometry conv_geometry(std::size_t width) {
  kernels::ConvGeometry g;
  g.batch = 1;
  g.in_channels = 16;
  g.in_width = width;
  g.out_channels = 16;
  g.kernel = 3;
  g.dilation = 2;
  return g;
}

template <bool Serial>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Serial)
      kernels::serial::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    else
      kernels::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

template <bool Serial>
void BM_Conv1dForward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
  auto x = noise(g.in_channels * g.in_width, 3);
  auto w = noise(g.out_channels * g.in_channels * g.kernel, 4);
  auto bias = noise(g.out_channels, 5);
  std::vector<double> y(g.out_channels * g.out_width());
  for (auto _ : state) {
    if constexpr (Serial)
      kernels::serial::conv1d_forward(g, x.data(), w.data(), bias.data(), y.data());
    else
      kernels::conv1d_forward(g, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Serial>
void BM_Conv1dBackward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
  auto x = noise(g.in_channels * g.in_width, 3);
  auto w = noise(g.out_channels * g.in_channels * g.kernel, 4);
  auto gy = noise(g.out_channels * g.out_width(), 6);
  std::vector<double> gx(x.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Serial)
      kernels::serial::conv1d_backward(g, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
    else
      kernels::conv1d_backward(g, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
    benchmark::DoNotOptimize(gx.data());
  }
}

void BM_ModelStep(benchmark::State& state) {
  ModelConfig cfg;
  Model model(cfg, 1);
  const auto w = static_cast<std::size_t>(state.range(0));
  Tensor x({1, 1, w}, noise(w, 7));
  const std::size_t target[1] = {0};
  for (auto _ : state) {
    Tape tape;
    auto out = model.forward(tape, tape.constant(x), true, 1);
    tape.backward(training::focal_loss(out.log_probs, target, {}));
  }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Conv1dForward<true>)->Arg(4096)->Arg(16384);
BENCHMARK(BM_Conv1dForward<false>)->Arg(4096)->Arg(16384);
BENCHMARK(BM_Conv1dBackward<true>)->Arg(4096)->Arg(16384);
BENCHMARK(BM_Conv1dBackward<false>)->Arg(4096)->Arg(16384);
BENCHMARK(BM_ModelStep)->Arg(8000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
