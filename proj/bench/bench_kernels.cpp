// Serial reference vs OpenMP kernels at desk-scale layer shapes.

#include <benchmark/benchmark.h>

#include <vector>

#include "vvnet/io.hpp"
#include "vvnet/kernels.hpp"
#include "vvnet/projection.hpp"
#include "vvnet/random.hpp"

using namespace vvnet;
using namespace vvnet::kernels;

namespace {

std::vector<double> noise(std::int64_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

// Shapes: a 3x3 2D conv on the 80x60 view, a 3x3x3 conv on the 20x12x20 volume.
ConvGeometry conv_shape(bool volume) {
  ConvGeometry g;
  g.in_channels = g.out_channels = volume ? 16 : 8;
  if (volume) {
    g.in = {20, 12, 20};
    g.kernel = {3, 3, 3};
    g.pad = {1, 1, 1};
  } else {
    g.in = {1, 60, 80};
    g.kernel = {1, 3, 3};
    g.pad = {0, 1, 1};
  }
  return g;
}

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_shape(state.range(0) == 3);
  auto x = noise(g.in_channels * g.in_volume(), 1);
  auto w = noise(g.weight_size(), 2);
  auto b = noise(g.out_channels, 3);
  std::vector<double> y(static_cast<std::size_t>(g.out_channels * g.out_volume()));
  for (auto _ : state) {
    if constexpr (kParallel) parallel::conv_forward(g, x, w, b, y);
    else reference::conv_forward(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(double(g.macs()) * state.iterations(),
                                               benchmark::Counter::kIsRate);
}

template <bool kParallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_shape(state.range(0) == 3);
  auto x = noise(g.in_channels * g.in_volume(), 1);
  auto w = noise(g.weight_size(), 2);
  auto gy = noise(g.out_channels * g.out_volume(), 3);
  std::vector<double> gx(x.size()), gw(w.size()), gb(static_cast<std::size_t>(g.out_channels));
  for (auto _ : state) {
    if constexpr (kParallel) {
      parallel::conv_backward_input(g, gy, w, gx);
      parallel::conv_backward_weight(g, gy, x, gw, gb);
    } else {
      reference::conv_backward_input(g, gy, w, gx);
      reference::conv_backward_weight(g, gy, x, gw, gb);
    }
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool kParallel>
void BM_MaxPool(benchmark::State& state) {
  PoolGeometry g;
  g.channels = 16;
  g.in = {20, 12, 20};
  g.window = {2, 2, 2};
  auto x = noise(g.channels * g.in_volume(), 4);
  std::vector<double> y(static_cast<std::size_t>(g.channels * g.out_volume()));
  std::vector<std::int64_t> arg(y.size());
  for (auto _ : state) {
    if constexpr (kParallel) parallel::max_pool_forward(g, x, y, arg);
    else reference::max_pool_forward(g, x, y, arg);
    benchmark::DoNotOptimize(y.data());
  }
}

const ProjectionTable& desk_table() {
  static const ProjectionTable table = [] {
    DatasetOptions opt;
    SceneRecord s = make_scene(opt, 0);
    VoxelGrid fine = opt.layout.grid.rescaled(0.5);
    return build_projection_table(s.depth, opt.camera, fine);
  }();
  return table;
}

template <bool kParallel>
void BM_ScatterMean(benchmark::State& state) {
  const auto& idx = *desk_table().index;
  const int channels = 32;
  auto f = noise(channels * idx.num_pixels, 5);
  std::vector<double> vol(static_cast<std::size_t>(channels * idx.num_voxels));
  std::vector<double> gf(f.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      parallel::scatter_mean_forward(idx, channels, f, vol);
      parallel::scatter_mean_backward(idx, channels, vol, gf);
    } else {
      reference::scatter_mean_forward(idx, channels, f, vol);
      reference::scatter_mean_backward(idx, channels, vol, gf);
    }
    benchmark::DoNotOptimize(gf.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Arg(2)->Arg(3);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Arg(2)->Arg(3)->UseRealTime();
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Arg(2)->Arg(3);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Arg(2)->Arg(3)->UseRealTime();
BENCHMARK(BM_MaxPool<false>)->Name("max_pool3d/reference");
BENCHMARK(BM_MaxPool<true>)->Name("max_pool3d/parallel")->UseRealTime();
BENCHMARK(BM_ScatterMean<false>)->Name("scatter_mean/reference");
BENCHMARK(BM_ScatterMean<true>)->Name("scatter_mean/parallel")->UseRealTime();

BENCHMARK_MAIN();
