#include <algorithm>
#include <limits>
#include <vector>

#include "vvnet/kernels.hpp"

namespace vvnet::kernels::parallel {

namespace {

inline int floor_div(int a, int b) {
  int q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

inline int ceil_div(int a, int b) { return -floor_div(-a, b); }

struct Range {
  int lo;
  int hi;
};

// Output coordinates o in [0, out) whose source o*s - p + k*d lies in [0, n).
inline Range valid_outputs(int n, int out, int s, int p, int d, int k) {
  int shift = k * d - p;
  int lo = std::max(0, ceil_div(-shift, s));
  int hi = std::min(out, floor_div(n - 1 - shift, s) + 1);
  return {lo, std::max(lo, hi)};
}

}  // namespace

void conv_forward(const ConvGeometry& g, std::span<const double> x,
                  std::span<const double> w, std::span<const double> b,
                  std::span<double> y) {
  const auto out = g.out();
  const auto& k = g.kernel;
  const std::int64_t out_vol = g.out_volume();
  const std::int64_t in_vol = g.in_volume();
  const std::int64_t taps = g.taps();

#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_channels; ++o) {
    double* yo = y.data() + o * out_vol;
    std::fill(yo, yo + out_vol, b.empty() ? 0.0 : b[o]);
    for (int c = 0; c < g.in_channels; ++c) {
      const double* xc = x.data() + c * in_vol;
      const double* wc = w.data() + (std::int64_t{o} * g.in_channels + c) * taps;
      for (int kz = 0; kz < k[0]; ++kz) {
        auto rz = valid_outputs(g.in[0], out[0], g.stride[0], g.pad[0], g.dilation[0], kz);
        for (int ky = 0; ky < k[1]; ++ky) {
          auto ry = valid_outputs(g.in[1], out[1], g.stride[1], g.pad[1], g.dilation[1], ky);
          for (int kx = 0; kx < k[2]; ++kx) {
            auto rx = valid_outputs(g.in[2], out[2], g.stride[2], g.pad[2], g.dilation[2], kx);
            const double wv = wc[(kz * k[1] + ky) * k[2] + kx];
            const int sx = g.stride[2];
            for (int oz = rz.lo; oz < rz.hi; ++oz) {
              const int iz = oz * g.stride[0] - g.pad[0] + kz * g.dilation[0];
              for (int oy = ry.lo; oy < ry.hi; ++oy) {
                const int iy = oy * g.stride[1] - g.pad[1] + ky * g.dilation[1];
                double* yrow = yo + (std::int64_t{oz} * out[1] + oy) * out[2];
                const std::int64_t base = (std::int64_t{iz} * g.in[1] + iy) * g.in[2] +
                                          kx * g.dilation[2] - g.pad[2];
                if (sx == 1) {
                  const double* xrow = xc + base;
                  for (int ox = rx.lo; ox < rx.hi; ++ox) yrow[ox] += wv * xrow[ox];
                } else {
                  for (int ox = rx.lo; ox < rx.hi; ++ox) yrow[ox] += wv * xc[base + ox * sx];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> gy,
                         std::span<const double> w, std::span<double> gx) {
  const auto out = g.out();
  const auto& k = g.kernel;
  const std::int64_t out_vol = g.out_volume();
  const std::int64_t in_vol = g.in_volume();
  const std::int64_t taps = g.taps();

#pragma omp parallel
  {
    std::vector<double> acc(static_cast<std::size_t>(in_vol));
#pragma omp for schedule(static)
    for (int c = 0; c < g.in_channels; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double* ac = acc.data();
      for (int o = 0; o < g.out_channels; ++o) {
        const double* go = gy.data() + o * out_vol;
        const double* wc = w.data() + (std::int64_t{o} * g.in_channels + c) * taps;
        for (int kz = 0; kz < k[0]; ++kz) {
          auto rz = valid_outputs(g.in[0], out[0], g.stride[0], g.pad[0], g.dilation[0], kz);
          for (int ky = 0; ky < k[1]; ++ky) {
            auto ry = valid_outputs(g.in[1], out[1], g.stride[1], g.pad[1], g.dilation[1], ky);
            for (int kx = 0; kx < k[2]; ++kx) {
              auto rx = valid_outputs(g.in[2], out[2], g.stride[2], g.pad[2], g.dilation[2], kx);
              const double wv = wc[(kz * k[1] + ky) * k[2] + kx];
              const int sx = g.stride[2];
              for (int oz = rz.lo; oz < rz.hi; ++oz) {
                const int iz = oz * g.stride[0] - g.pad[0] + kz * g.dilation[0];
                for (int oy = ry.lo; oy < ry.hi; ++oy) {
                  const int iy = oy * g.stride[1] - g.pad[1] + ky * g.dilation[1];
                  const double* grow = go + (std::int64_t{oz} * out[1] + oy) * out[2];
                  const std::int64_t base = (std::int64_t{iz} * g.in[1] + iy) * g.in[2] +
                                            kx * g.dilation[2] - g.pad[2];
                  if (sx == 1) {
                    double* arow = ac + base;
                    for (int ox = rx.lo; ox < rx.hi; ++ox) arow[ox] += wv * grow[ox];
                  } else {
                    for (int ox = rx.lo; ox < rx.hi; ++ox) ac[base + ox * sx] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      }
      double* gc = gx.data() + c * in_vol;
      for (std::int64_t i = 0; i < in_vol; ++i) gc[i] += ac[i];
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                          std::span<const double> x, std::span<double> gw,
                          std::span<double> gb) {
  const auto out = g.out();
  const auto& k = g.kernel;
  const std::int64_t out_vol = g.out_volume();
  const std::int64_t in_vol = g.in_volume();
  const std::int64_t taps = g.taps();

#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_channels; ++o) {
    const double* go = gy.data() + o * out_vol;
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < out_vol; ++i) acc += go[i];
      gb[o] += acc;
    }
    for (int c = 0; c < g.in_channels; ++c) {
      const double* xc = x.data() + c * in_vol;
      double* wc = gw.data() + (std::int64_t{o} * g.in_channels + c) * taps;
      for (int kz = 0; kz < k[0]; ++kz) {
        auto rz = valid_outputs(g.in[0], out[0], g.stride[0], g.pad[0], g.dilation[0], kz);
        for (int ky = 0; ky < k[1]; ++ky) {
          auto ry = valid_outputs(g.in[1], out[1], g.stride[1], g.pad[1], g.dilation[1], ky);
          for (int kx = 0; kx < k[2]; ++kx) {
            auto rx = valid_outputs(g.in[2], out[2], g.stride[2], g.pad[2], g.dilation[2], kx);
            const int sx = g.stride[2];
            double acc = 0.0;
            for (int oz = rz.lo; oz < rz.hi; ++oz) {
              const int iz = oz * g.stride[0] - g.pad[0] + kz * g.dilation[0];
              for (int oy = ry.lo; oy < ry.hi; ++oy) {
                const int iy = oy * g.stride[1] - g.pad[1] + ky * g.dilation[1];
                const double* grow = go + (std::int64_t{oz} * out[1] + oy) * out[2];
                const std::int64_t base = (std::int64_t{iz} * g.in[1] + iy) * g.in[2] +
                                          kx * g.dilation[2] - g.pad[2];
                for (int ox = rx.lo; ox < rx.hi; ++ox) acc += grow[ox] * xc[base + ox * sx];
              }
            }
            wc[(kz * k[1] + ky) * k[2] + kx] += acc;
          }
        }
      }
    }
  }
}

namespace {

inline std::int64_t pool_source(const PoolGeometry& g, int c, int iz, int iy, int ix) {
  return ((std::int64_t{c} * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix;
}

}  // namespace

void max_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y, std::span<std::int64_t> argmax) {
  const auto out = g.out();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    for (int oz = 0; oz < out[0]; ++oz)
      for (int oy = 0; oy < out[1]; ++oy)
        for (int ox = 0; ox < out[2]; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_i = -1;
          for (int wz = 0; wz < g.window[0]; ++wz)
            for (int wy = 0; wy < g.window[1]; ++wy)
              for (int wx = 0; wx < g.window[2]; ++wx) {
                auto xi = pool_source(g, c, oz * g.window[0] + wz, oy * g.window[1] + wy,
                                      ox * g.window[2] + wx);
                if (best_i < 0 || x[xi] > best) {
                  best = x[xi];
                  best_i = xi;
                }
              }
          auto yi = ((std::int64_t{c} * out[0] + oz) * out[1] + oy) * out[2] + ox;
          y[yi] = best;
          argmax[yi] = best_i;
        }
  }
}

void max_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<const std::int64_t> argmax,
                       std::span<double> gx) {
  const std::int64_t out_vol = g.out_volume();
  // Windows do not overlap, so per-channel routing never races.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    for (std::int64_t i = c * out_vol; i < (c + 1) * out_vol; ++i) gx[argmax[i]] += gy[i];
  }
}

void avg_pool_forward(const PoolGeometry& g, std::span<const double> x,
                      std::span<double> y) {
  const auto out = g.out();
  const double count = double(g.window[0]) * g.window[1] * g.window[2];
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    for (int oz = 0; oz < out[0]; ++oz)
      for (int oy = 0; oy < out[1]; ++oy)
        for (int ox = 0; ox < out[2]; ++ox) {
          double acc = 0.0;
          for (int wz = 0; wz < g.window[0]; ++wz)
            for (int wy = 0; wy < g.window[1]; ++wy)
              for (int wx = 0; wx < g.window[2]; ++wx)
                acc += x[pool_source(g, c, oz * g.window[0] + wz, oy * g.window[1] + wy,
                                     ox * g.window[2] + wx)];
          y[((std::int64_t{c} * out[0] + oz) * out[1] + oy) * out[2] + ox] = acc / count;
        }
  }
}

void avg_pool_backward(const PoolGeometry& g, std::span<const double> gy,
                       std::span<double> gx) {
  const auto out = g.out();
  const double count = double(g.window[0]) * g.window[1] * g.window[2];
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    for (int oz = 0; oz < out[0]; ++oz)
      for (int oy = 0; oy < out[1]; ++oy)
        for (int ox = 0; ox < out[2]; ++ox) {
          double share =
              gy[((std::int64_t{c} * out[0] + oz) * out[1] + oy) * out[2] + ox] / count;
          for (int wz = 0; wz < g.window[0]; ++wz)
            for (int wy = 0; wy < g.window[1]; ++wy)
              for (int wx = 0; wx < g.window[2]; ++wx)
                gx[pool_source(g, c, oz * g.window[0] + wz, oy * g.window[1] + wy,
                               ox * g.window[2] + wx)] += share;
        }
  }
}

void scatter_mean_forward(const ScatterIndex& idx, int channels,
                          std::span<const double> features,
                          std::span<double> volume) {
  const std::int64_t nv = idx.num_voxels;
  const std::int64_t np = idx.num_pixels;
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < nv; ++v) {
    const auto begin = idx.offsets[v];
    const auto end = idx.offsets[v + 1];
    for (int c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (auto j = begin; j < end; ++j) acc += features[c * np + idx.pixels[j]];
      volume[c * nv + v] = end > begin ? acc / double(end - begin) : 0.0;
    }
  }
}

void scatter_mean_backward(const ScatterIndex& idx, int channels,
                           std::span<const double> grad_volume,
                           std::span<double> grad_features) {
  const std::int64_t nv = idx.num_voxels;
  const std::int64_t np = idx.num_pixels;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < np; ++p) {
    const auto v = idx.pixel_voxel[p];
    if (v < 0) continue;
    const double n = double(idx.offsets[v + 1] - idx.offsets[v]);
    for (int c = 0; c < channels; ++c) {
      grad_features[c * np + p] += grad_volume[c * nv + v] / n;
    }
  }
}

}  // namespace vvnet::kernels::parallel
