// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "interacte/convcore.hpp"
#include "interacte/interact_count.hpp"
#include "interacte/rng.hpp"

using namespace interacte;

namespace {

// Model-sized input: t = 4 chequer grids of 20 x 20, 32 filters of 9 x 9.
ConvShape model_shape() {
  ConvShape s;
  s.channels = 4;
  s.height = 20;
  s.width = 20;
  s.n_filters = 32;
  s.k = 9;
  return s;
}

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool kReference>
void BM_ConvForward(benchmark::State& state) {
  const ConvShape s = model_shape();
  const auto in = random_values(s.in_size(), 1), w = random_values(s.filter_size(), 2);
  std::vector<float> out(s.out_size());
  for (auto _ : state) {
    if constexpr (kReference) {
      conv2d_forward_reference<float>(in, w, s, PadMode::kCircular, out);
    } else {
      conv2d_forward<float>(in, w, s, PadMode::kCircular, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool kReference>
void BM_ConvBackward(benchmark::State& state) {
  const ConvShape s = model_shape();
  const auto in = random_values(s.in_size(), 1), w = random_values(s.filter_size(), 2);
  const auto g = random_values(s.out_size(), 3);
  std::vector<float> gi(s.in_size()), gw(s.filter_size());
  for (auto _ : state) {
    if constexpr (kReference) {
      conv2d_backward_reference<float>(g, in, w, s, PadMode::kCircular, gi, gw);
    } else {
      conv2d_backward<float>(g, in, w, s, PadMode::kCircular, gi, gw);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool kSerial>
void BM_Count(benchmark::State& state) {
  CountQuery q;
  q.kind = ReshapeKind::kChequer;
  q.n = static_cast<std::size_t>(state.range(0));
  q.k = 9;
  q.pad_mode = PadMode::kCircular;
  q.p = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kSerial ? count_bruteforce_serial(q) : count_bruteforce(q));
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/reference");
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/openmp");
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/reference");
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/openmp");
BENCHMARK(BM_Count<true>)->Name("count_bruteforce/serial")->Arg(24)->Arg(48);
BENCHMARK(BM_Count<false>)->Name("count_bruteforce/openmp")->Arg(24)->Arg(48);

BENCHMARK_MAIN();
