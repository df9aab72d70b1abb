#pragma once

// Dense compute kernels. Every kernel exists twice:
//   reference::  straight-line serial loops written from the definition,
//                kept as the test oracle and the benchmark baseline;
//   parallel::   OpenMP versions used by the autograd ops.
// Both fix the summation order per output element, so results agree to
// rounding regardless of thread count.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace vvnet::kernels {

using Index3 = std::array<int, 3>;

/// Convolution geometry with three spatial axes. 2D layers use a leading
/// spatial extent of 1 with kernel 1, stride 1, padding 0.
struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  Index3 in{1, 1, 1};
  Index3 kernel{1, 1, 1};
  Index3 stride{1, 1, 1};
  Index3 pad{0, 0, 0};
  Index3 dilation{1, 1, 1};

  Index3 out() const;
  std::int64_t in_volume() const;
  std::int64_t out_volume() const;
  std::int64_t taps() const;
  std::int64_t weight_size() const;
  // Multiply-accumulates of one forward pass.
  std::int64_t macs() const;
};

/// Window/stride geometry for non-overlapping pooling.
struct PoolGeometry {
  int channels = 0;
  Index3 in{1, 1, 1};
  Index3 window{1, 1, 1};

  Index3 out() const;
  std::int64_t in_volume() const;
  std::int64_t out_volume() const;
};

/// Pixel-to-voxel membership in compressed form. Contributors of voxel v are
/// pixels[offsets[v] .. offsets[v+1]), ascending.
struct ScatterIndex {
  std::int64_t num_pixels = 0;
  std::int64_t num_voxels = 0;
  std::vector<std::int64_t> offsets;      // num_voxels + 1
  std::vector<std::int64_t> pixels;       // contributors, grouped by voxel
  std::vector<std::int64_t> pixel_voxel;  // -1 when the pixel maps nowhere
};

namespace reference {

// y = conv(x, w) + b; y is overwritten.
void conv_forward(const ConvGeometry& g, std::span<const double> x,
                  std::span<const double> w, std::span<const double> b,
                  std::span<double> y);
// gx += conv_transpose(gy, w)
void conv_backward_input(const ConvGeometry& g, std::span<const double> gy,
                         std::span<const double> w, std::span<double> gx);
// gw += corr(gy, x); gb += sum(gy) when gb is non-empty
void conv_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                          std::span<const double> x, std::span<double> gw,
                          std::span<double> gb);

// Ties resolve to the first element in window scan order.
void max_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y, std::span<std::int64_t> argmax);
void max_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<const std::int64_t> argmax,
                       std::span<double> gx);
void avg_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y);
void avg_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<double> gx);

// Per-voxel mean of contributing pixel features; features are [C, pixels],
// volume is [C, voxels].
void scatter_mean_forward(const ScatterIndex& idx, int channels,
                          std::span<const double> features,
                          std::span<double> volume);
void scatter_mean_backward(const ScatterIndex& idx, int channels,
                           std::span<const double> grad_volume,
                           std::span<double> grad_features);

}  // namespace reference

namespace parallel {

void conv_forward(const ConvGeometry& g, std::span<const double> x,
                  std::span<const double> w, std::span<const double> b,
                  std::span<double> y);
void conv_backward_input(const ConvGeometry& g, std::span<const double> gy,
                         std::span<const double> w, std::span<double> gx);
void conv_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                          std::span<const double> x, std::span<double> gw,
                          std::span<double> gb);

void max_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y, std::span<std::int64_t> argmax);
void max_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<const std::int64_t> argmax,
                       std::span<double> gx);
void avg_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y);
void avg_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<double> gx);

// Parallel over voxels (gather).
void scatter_mean_forward(const ScatterIndex& idx, int channels,
                          std::span<const double> features,
                          std::span<double> volume);
// Parallel over pixels.
void scatter_mean_backward(const ScatterIndex& idx, int channels,
                           std::span<const double> grad_volume,
                           std::span<double> grad_features);

}  // namespace parallel

}  // namespace vvnet::kernels
