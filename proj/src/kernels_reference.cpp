#include <algorithm>
#include <limits>

#include "vvnet/kernels.hpp"

namespace vvnet::kernels::reference {

namespace {

// Input coordinate read by output coordinate `o` through tap `k`, or -1.
inline int source(int o, int k, int axis_in, int s, int p, int d) {
  int i = o * s - p + k * d;
  return (i >= 0 && i < axis_in) ? i : -1;
}

}  // namespace

void conv_forward(const ConvGeometry& g, std::span<const double> x,
                  std::span<const double> w, std::span<const double> b,
                  std::span<double> y) {
  const auto out = g.out();
  const auto& k = g.kernel;
  for (int o = 0; o < g.out_channels; ++o) {
    for (int oz = 0; oz < out[0]; ++oz) {
      for (int oy = 0; oy < out[1]; ++oy) {
        for (int ox = 0; ox < out[2]; ++ox) {
          double acc = b.empty() ? 0.0 : b[o];
          for (int c = 0; c < g.in_channels; ++c) {
            for (int kz = 0; kz < k[0]; ++kz) {
              int iz = source(oz, kz, g.in[0], g.stride[0], g.pad[0], g.dilation[0]);
              if (iz < 0) continue;
              for (int ky = 0; ky < k[1]; ++ky) {
                int iy = source(oy, ky, g.in[1], g.stride[1], g.pad[1], g.dilation[1]);
                if (iy < 0) continue;
                for (int kx = 0; kx < k[2]; ++kx) {
                  int ix = source(ox, kx, g.in[2], g.stride[2], g.pad[2], g.dilation[2]);
                  if (ix < 0) continue;
                  auto wi = ((std::int64_t{o} * g.in_channels + c) * k[0] + kz) * k[1] * k[2] +
                            ky * k[2] + kx;
                  auto xi = ((std::int64_t{c} * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix;
                  acc += w[wi] * x[xi];
                }
              }
            }
          }
          y[((std::int64_t{o} * out[0] + oz) * out[1] + oy) * out[2] + ox] = acc;
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> gy,
                         std::span<const double> w, std::span<double> gx) {
  const auto out = g.out();
  const auto& k = g.kernel;
  for (int c = 0; c < g.in_channels; ++c) {
    for (int iz = 0; iz < g.in[0]; ++iz) {
      for (int iy = 0; iy < g.in[1]; ++iy) {
        for (int ix = 0; ix < g.in[2]; ++ix) {
          double acc = 0.0;
          for (int o = 0; o < g.out_channels; ++o) {
            for (int kz = 0; kz < k[0]; ++kz) {
              int nz = iz + g.pad[0] - kz * g.dilation[0];
              if (nz < 0 || nz % g.stride[0] != 0 || nz / g.stride[0] >= out[0]) continue;
              int oz = nz / g.stride[0];
              for (int ky = 0; ky < k[1]; ++ky) {
                int ny = iy + g.pad[1] - ky * g.dilation[1];
                if (ny < 0 || ny % g.stride[1] != 0 || ny / g.stride[1] >= out[1]) continue;
                int oy = ny / g.stride[1];
                for (int kx = 0; kx < k[2]; ++kx) {
                  int nx = ix + g.pad[2] - kx * g.dilation[2];
                  if (nx < 0 || nx % g.stride[2] != 0 || nx / g.stride[2] >= out[2]) continue;
                  int ox = nx / g.stride[2];
                  auto wi = ((std::int64_t{o} * g.in_channels + c) * k[0] + kz) * k[1] * k[2] +
                            ky * k[2] + kx;
                  auto yi = ((std::int64_t{o} * out[0] + oz) * out[1] + oy) * out[2] + ox;
                  acc += w[wi] * gy[yi];
                }
              }
            }
          }
          gx[((std::int64_t{c} * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix] += acc;
        }
      }
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                          std::span<const double> x, std::span<double> gw,
                          std::span<double> gb) {
  const auto out = g.out();
  const auto& k = g.kernel;
  const auto out_vol = g.out_volume();
  for (int o = 0; o < g.out_channels; ++o) {
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < out_vol; ++i) acc += gy[o * out_vol + i];
      gb[o] += acc;
    }
    for (int c = 0; c < g.in_channels; ++c) {
      for (int kz = 0; kz < k[0]; ++kz) {
        for (int ky = 0; ky < k[1]; ++ky) {
          for (int kx = 0; kx < k[2]; ++kx) {
            double acc = 0.0;
            for (int oz = 0; oz < out[0]; ++oz) {
              int iz = source(oz, kz, g.in[0], g.stride[0], g.pad[0], g.dilation[0]);
              if (iz < 0) continue;
              for (int oy = 0; oy < out[1]; ++oy) {
                int iy = source(oy, ky, g.in[1], g.stride[1], g.pad[1], g.dilation[1]);
                if (iy < 0) continue;
                for (int ox = 0; ox < out[2]; ++ox) {
                  int ix = source(ox, kx, g.in[2], g.stride[2], g.pad[2], g.dilation[2]);
                  if (ix < 0) continue;
                  auto yi = ((std::int64_t{o} * out[0] + oz) * out[1] + oy) * out[2] + ox;
                  auto xi = ((std::int64_t{c} * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix;
                  acc += gy[yi] * x[xi];
                }
              }
            }
            auto wi = ((std::int64_t{o} * g.in_channels + c) * k[0] + kz) * k[1] * k[2] +
                      ky * k[2] + kx;
            gw[wi] += acc;
          }
        }
      }
    }
  }
}

namespace {

template <typename Visit>
void for_each_window(const PoolGeometry& g, Visit&& visit) {
  const auto out = g.out();
  for (int c = 0; c < g.channels; ++c) {
    for (int oz = 0; oz < out[0]; ++oz) {
      for (int oy = 0; oy < out[1]; ++oy) {
        for (int ox = 0; ox < out[2]; ++ox) {
          auto yi = ((std::int64_t{c} * out[0] + oz) * out[1] + oy) * out[2] + ox;
          visit(c, oz, oy, ox, yi);
        }
      }
    }
  }
}

inline std::int64_t pool_source(const PoolGeometry& g, int c, int oz, int oy,
                                int ox, int wz, int wy, int wx) {
  int iz = oz * g.window[0] + wz;
  int iy = oy * g.window[1] + wy;
  int ix = ox * g.window[2] + wx;
  return ((std::int64_t{c} * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix;
}

}  // namespace

void max_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y, std::span<std::int64_t> argmax) {
  for_each_window(g, [&](int c, int oz, int oy, int ox, std::int64_t yi) {
    double best = -std::numeric_limits<double>::infinity();
    std::int64_t best_i = -1;
    for (int wz = 0; wz < g.window[0]; ++wz)
      for (int wy = 0; wy < g.window[1]; ++wy)
        for (int wx = 0; wx < g.window[2]; ++wx) {
          auto xi = pool_source(g, c, oz, oy, ox, wz, wy, wx);
          if (best_i < 0 || x[xi] > best) {
            best = x[xi];
            best_i = xi;
          }
        }
    y[yi] = best;
    argmax[yi] = best_i;
  });
}

void max_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<const std::int64_t> argmax,
                       std::span<double> gx) {
  auto n = std::int64_t{g.channels} * g.out_volume();
  for (std::int64_t i = 0; i < n; ++i) gx[argmax[i]] += gy[i];
}

void avg_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y) {
  const double count = double(g.window[0]) * g.window[1] * g.window[2];
  for_each_window(g, [&](int c, int oz, int oy, int ox, std::int64_t yi) {
    double acc = 0.0;
    for (int wz = 0; wz < g.window[0]; ++wz)
      for (int wy = 0; wy < g.window[1]; ++wy)
        for (int wx = 0; wx < g.window[2]; ++wx)
          acc += x[pool_source(g, c, oz, oy, ox, wz, wy, wx)];
    y[yi] = acc / count;
  });
}

void avg_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<double> gx) {
  const double count = double(g.window[0]) * g.window[1] * g.window[2];
  for_each_window(g, [&](int c, int oz, int oy, int ox, std::int64_t yi) {
    double share = gy[yi] / count;
    for (int wz = 0; wz < g.window[0]; ++wz)
      for (int wy = 0; wy < g.window[1]; ++wy)
        for (int wx = 0; wx < g.window[2]; ++wx)
          gx[pool_source(g, c, oz, oy, ox, wz, wy, wx)] += share;
  });
}

void scatter_mean_forward(const ScatterIndex& idx, int channels,
                          std::span<const double> features,
                          std::span<double> volume) {
  std::fill(volume.begin(), volume.end(), 0.0);
  for (int c = 0; c < channels; ++c) {
    for (std::int64_t p = 0; p < idx.num_pixels; ++p) {
      auto v = idx.pixel_voxel[p];
      if (v >= 0) volume[c * idx.num_voxels + v] += features[c * idx.num_pixels + p];
    }
    for (std::int64_t v = 0; v < idx.num_voxels; ++v) {
      auto n = idx.offsets[v + 1] - idx.offsets[v];
      if (n > 0) volume[c * idx.num_voxels + v] /= double(n);
    }
  }
}

void scatter_mean_backward(const ScatterIndex& idx, int channels,
                           std::span<const double> grad_volume,
                           std::span<double> grad_features) {
  for (int c = 0; c < channels; ++c) {
    for (std::int64_t p = 0; p < idx.num_pixels; ++p) {
      auto v = idx.pixel_voxel[p];
      if (v < 0) continue;
      auto n = idx.offsets[v + 1] - idx.offsets[v];
      grad_features[c * idx.num_pixels + p] += grad_volume[c * idx.num_voxels + v] / double(n);
    }
  }
}

}  // namespace vvnet::kernels::reference
