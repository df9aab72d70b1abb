#include "vvnet/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "vvnet/error.hpp"

namespace vvnet {

namespace {

std::atomic<std::int64_t> g_conv_macs{0};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
}

std::shared_ptr<Node> make_node(const char* op, std::vector<Tensor> inputs) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs = std::move(inputs);
  return node;
}

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

// Spatial rank of a [C, s...] tensor, validated to 2 or 3.
int spatial_rank(const Tensor& x, const char* op) {
  auto r = static_cast<int>(x.rank()) - 1;
  if (r != 2 && r != 3) {
    throw ShapeMismatch(std::string(op) + ": expected [C,H,W] or [C,X,Y,Z], got " +
                        shape_str(x.shape()));
  }
  return r;
}

// Pads a spatial extent list to three axes by prepending unit axes.
kernels::Index3 to_index3(std::span<const std::int64_t> dims, int fill) {
  kernels::Index3 out{fill, fill, fill};
  auto offset = 3 - dims.size();
  for (std::size_t i = 0; i < dims.size(); ++i) out[offset + i] = static_cast<int>(dims[i]);
  return out;
}

kernels::Index3 to_index3(const std::vector<int>& v, int rank, int fill, const char* what) {
  if (static_cast<int>(v.size()) != rank) {
    throw ShapeMismatch(std::string("conv: ") + what + " has " + std::to_string(v.size()) +
                        " entries for spatial rank " + std::to_string(rank));
  }
  kernels::Index3 out{fill, fill, fill};
  for (int i = 0; i < rank; ++i) out[3 - rank + i] = v[i];
  return out;
}

Shape spatial_shape(const kernels::Index3& s, int rank) {
  Shape out;
  for (int i = 3 - rank; i < 3; ++i) out.push_back(s[i]);
  return out;
}

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& w, int rank,
                                    const ConvOptions& opt) {
  kernels::ConvGeometry g;
  g.in_channels = static_cast<int>(x[0]);
  g.out_channels = static_cast<int>(w[0]);
  g.in = to_index3(std::span(x).subspan(1), 1);
  g.kernel = to_index3(std::span(w).subspan(2), 1);
  g.stride = to_index3(opt.stride, rank, 1, "stride");
  g.pad = to_index3(opt.padding, rank, 0, "padding");
  g.dilation = to_index3(opt.dilation, rank, 1, "dilation");
  for (int a = 0; a < 3; ++a) {
    if (g.stride[a] < 1 || g.dilation[a] < 1 || g.pad[a] < 0) {
      throw ShapeMismatch("conv: stride and dilation must be >= 1, padding >= 0");
    }
  }
  return g;
}

}  // namespace

std::int64_t conv_mac_count() { return g_conv_macs.load(); }

void reset_conv_mac_count() { g_conv_macs.store(0); }

ConvOptions ConvOptions::uniform(int rank, int stride, int padding, int dilation) {
  return {std::vector<int>(rank, stride), std::vector<int>(rank, padding),
          std::vector<int>(rank, dilation)};
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto node = make_node("add", {a, b});
  node->backward = [a, b](std::span<const double> g) mutable {
    if (wants_grad(a)) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  };
  return Tensor::make_result(a.shape(), std::move(out), std::move(node));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto node = make_node("sub", {a, b});
  node->backward = [a, b](std::span<const double> g) mutable {
    if (wants_grad(a)) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  };
  return Tensor::make_result(a.shape(), std::move(out), std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto node = make_node("mul", {a, b});
  node->backward = [a, b](std::span<const double> g) mutable {
    if (wants_grad(a)) {
      auto ga = a.grad();
      auto bd = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
    }
    if (wants_grad(b)) {
      auto gb = b.grad();
      auto ad = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
    }
  };
  return Tensor::make_result(a.shape(), std::move(out), std::move(node));
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  auto node = make_node("scale", {a});
  node->backward = [a, factor](std::span<const double> g) mutable {
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  };
  return Tensor::make_result(a.shape(), std::move(out), std::move(node));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  auto node = make_node("relu", {a});
  node->backward = [a](std::span<const double> g) mutable {
    auto ga = a.grad();
    auto ad = a.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (ad[i] > 0.0) ga[i] += g[i];
    }
  };
  return Tensor::make_result(a.shape(), std::move(out), std::move(node));
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto node = make_node("sum", {a});
  node->backward = [a](std::span<const double> g) mutable {
    for (auto& v : a.grad()) v += g[0];
  };
  return Tensor::make_result({}, {acc}, std::move(node));
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeMismatch("mean of empty tensor");
  return scale(sum(a), 1.0 / double(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeMismatch("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  auto node = make_node("reshape", {a});
  node->backward = [a](std::span<const double> g) mutable {
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return Tensor::make_result(std::move(shape), std::move(out), std::move(node));
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  Shape shape = parts[0].shape();
  if (shape.empty()) throw ShapeMismatch("concat of scalars");
  std::int64_t channels = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ShapeMismatch("concat " + shape_str(p.shape()) + " with " + shape_str(shape));
    }
    channels += p.dim(0);
  }
  shape[0] = channels;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(shape_numel(shape)));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  auto node = make_node("concat", inputs);
  node->backward = [inputs](std::span<const double> g) mutable {
    std::size_t offset = 0;
    for (auto& p : inputs) {
      auto n = static_cast<std::size_t>(p.numel());
      if (wants_grad(p)) {
        auto gp = p.grad();
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  };
  return Tensor::make_result(std::move(shape), std::move(out), std::move(node));
}

Tensor conv(const Tensor& x, const Tensor& weight, const Tensor& bias,
            const ConvOptions& opt) {
  const int rank = spatial_rank(x, "conv");
  if (static_cast<int>(weight.rank()) != rank + 2 || weight.dim(1) != x.dim(0)) {
    throw ShapeMismatch("conv: input " + shape_str(x.shape()) + " vs kernel " +
                        shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw ShapeMismatch("conv: bias " + shape_str(bias.shape()) + " for kernel " +
                        shape_str(weight.shape()));
  }
  auto g = conv_geometry(x.shape(), weight.shape(), rank, opt);
  auto o = g.out();
  for (int a = 0; a < 3; ++a) {
    if (o[a] < 1) throw ShapeMismatch("conv: empty output for input " + shape_str(x.shape()));
  }
  Shape out_shape{weight.dim(0)};
  for (auto d : spatial_shape(o, rank)) out_shape.push_back(d);
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::span<const double> b = bias.defined() ? bias.data() : std::span<const double>{};
  kernels::parallel::conv_forward(g, x.data(), weight.data(), b, out);
  g_conv_macs.fetch_add(g.macs(), std::memory_order_relaxed);

  auto node = make_node("conv", {x, weight, bias});
  node->backward = [x, weight, bias, g](std::span<const double> gy) mutable {
    if (wants_grad(x)) kernels::parallel::conv_backward_input(g, gy, weight.data(), x.grad());
    if (wants_grad(weight) || wants_grad(bias)) {
      std::vector<double> scratch;
      std::span<double> gw;
      if (wants_grad(weight)) {
        gw = weight.grad();
      } else {
        scratch.assign(static_cast<std::size_t>(weight.numel()), 0.0);
        gw = scratch;
      }
      std::span<double> gb = wants_grad(bias) ? bias.grad() : std::span<double>{};
      kernels::parallel::conv_backward_weight(g, gy, x.data(), gw, gb);
    }
  };
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(node));
}

Tensor conv_transpose(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const ConvOptions& opt) {
  const int rank = spatial_rank(x, "conv_transpose");
  if (static_cast<int>(weight.rank()) != rank + 2 || weight.dim(0) != x.dim(0)) {
    throw ShapeMismatch("conv_transpose: input " + shape_str(x.shape()) + " vs kernel " +
                        shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(1))) {
    throw ShapeMismatch("conv_transpose: bias " + shape_str(bias.shape()));
  }
  // The equivalent forward conv maps the (larger) output space onto x.
  Shape out_shape{weight.dim(1)};
  for (int a = 0; a < rank; ++a) {
    auto n = (x.dim(a + 1) - 1) * opt.stride.at(a) - 2 * opt.padding.at(a) +
             opt.dilation.at(a) * (weight.dim(a + 2) - 1) + 1;
    if (n < 1) throw ShapeMismatch("conv_transpose: empty output");
    out_shape.push_back(n);
  }
  // Its kernel [O=C_in, C=C_out, k...] is exactly `weight`.
  auto g = conv_geometry(out_shape, weight.shape(), rank, opt);
  auto o = g.out();
  for (int a = 0; a < rank; ++a) {
    if (o[3 - rank + a] != x.dim(a + 1)) {
      throw ShapeMismatch("conv_transpose: inconsistent geometry for " + shape_str(x.shape()));
    }
  }
  const auto out_vol = g.in_volume();
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)), 0.0);
  kernels::parallel::conv_backward_input(g, x.data(), weight.data(), out);
  g_conv_macs.fetch_add(g.macs(), std::memory_order_relaxed);
  if (bias.defined()) {
    auto b = bias.data();
    for (std::int64_t c = 0; c < g.in_channels; ++c)
      for (std::int64_t i = 0; i < out_vol; ++i) out[c * out_vol + i] += b[c];
  }

  auto node = make_node("conv_transpose", {x, weight, bias});
  node->backward = [x, weight, bias, g, out_vol](std::span<const double> gy) mutable {
    if (wants_grad(x)) {
      std::vector<double> gx(static_cast<std::size_t>(x.numel()));
      kernels::parallel::conv_forward(g, gy, weight.data(), {}, gx);
      auto dst = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) dst[i] += gx[i];
    }
    if (wants_grad(weight)) {
      kernels::parallel::conv_backward_weight(g, x.data(), gy, weight.grad(), {});
    }
    if (wants_grad(bias)) {
      auto gb = bias.grad();
      for (std::int64_t c = 0; c < g.in_channels; ++c) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < out_vol; ++i) acc += gy[c * out_vol + i];
        gb[c] += acc;
      }
    }
  };
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(node));
}

namespace {

kernels::PoolGeometry pool_geometry(const Tensor& x, const char* op) {
  const int rank = spatial_rank(x, op);
  for (int a = 1; a <= rank; ++a) {
    if (x.dim(a) % 2 != 0) {
      throw IndivisibleSpatialDims(std::string(op) + ": " + shape_str(x.shape()) +
                                   " not divisible by 2");
    }
  }
  kernels::PoolGeometry g;
  g.channels = static_cast<int>(x.dim(0));
  g.in = to_index3(std::span(x.shape()).subspan(1), 1);
  g.window = {rank == 3 ? 2 : 1, 2, 2};
  return g;
}

Shape pooled_shape(const Tensor& x) {
  Shape s = x.shape();
  for (std::size_t a = 1; a < s.size(); ++a) s[a] /= 2;
  return s;
}

}  // namespace

Tensor max_pool2(const Tensor& x) {
  auto g = pool_geometry(x, "max_pool");
  Shape out_shape = pooled_shape(x);
  auto n = static_cast<std::size_t>(shape_numel(out_shape));
  std::vector<double> out(n);
  std::vector<std::int64_t> argmax(n);
  kernels::parallel::max_pool_forward(g, x.data(), out, argmax);
  auto node = make_node("max_pool", {x});
  node->backward = [x, g, argmax = std::move(argmax)](std::span<const double> gy) mutable {
    kernels::parallel::max_pool_backward(g, gy, argmax, x.grad());
  };
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(node));
}

Tensor avg_pool2(const Tensor& x) {
  auto g = pool_geometry(x, "avg_pool");
  Shape out_shape = pooled_shape(x);
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  kernels::parallel::avg_pool_forward(g, x.data(), out);
  auto node = make_node("avg_pool", {x});
  node->backward = [x, g](std::span<const double> gy) mutable {
    kernels::parallel::avg_pool_backward(g, gy, x.grad());
  };
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(node));
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training,
                  double eps, double momentum) {
  if (x.rank() < 2) throw ShapeMismatch("batch_norm: input " + shape_str(x.shape()));
  const auto channels = x.dim(0);
  for (const Tensor* t : {&gamma, &beta, static_cast<const Tensor*>(&running_mean), static_cast<const Tensor*>(&running_var)}) {
    if (t->rank() != 1 || t->dim(0) != channels) {
      throw ShapeMismatch("batch_norm: parameter " + shape_str(t->shape()) + " for input " +
                          shape_str(x.shape()));
    }
  }
  const auto m = x.numel() / channels;
  auto xd = x.data();
  std::vector<double> xhat(xd.size());
  std::vector<double> inv_std(static_cast<std::size_t>(channels));
  std::vector<double> out(xd.size());
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::int64_t c = 0; c < channels; ++c) {
    double mu, var;
    if (training) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < m; ++i) acc += xd[c * m + i];
      mu = acc / double(m);
      double sq = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        double d = xd[c * m + i] - mu;
        sq += d * d;
      }
      var = sq / double(m);
      running_mean.data()[c] = (1.0 - momentum) * running_mean.data()[c] + momentum * mu;
      running_var.data()[c] = (1.0 - momentum) * running_var.data()[c] + momentum * var;
    } else {
      mu = running_mean.data()[c];
      var = running_var.data()[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    for (std::int64_t i = 0; i < m; ++i) {
      auto k = c * m + i;
      xhat[k] = (xd[k] - mu) * inv_std[c];
      out[k] = gd[c] * xhat[k] + bd[c];
    }
  }
  auto node = make_node("batch_norm", {x, gamma, beta});
  node->backward = [x, gamma, beta, training, m, channels, xhat = std::move(xhat),
                    inv_std = std::move(inv_std)](std::span<const double> gy) mutable {
    auto gd = gamma.data();
    for (std::int64_t c = 0; c < channels; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        sum_g += gy[c * m + i];
        sum_gx += gy[c * m + i] * xhat[c * m + i];
      }
      if (wants_grad(gamma)) gamma.grad()[c] += sum_gx;
      if (wants_grad(beta)) beta.grad()[c] += sum_g;
      if (!wants_grad(x)) continue;
      auto gx = x.grad();
      const double k = gd[c] * inv_std[c];
      if (training) {
        const double mean_g = sum_g / double(m);
        const double mean_gx = sum_gx / double(m);
        for (std::int64_t i = 0; i < m; ++i) {
          gx[c * m + i] += k * (gy[c * m + i] - mean_g - xhat[c * m + i] * mean_gx);
        }
      } else {
        for (std::int64_t i = 0; i < m; ++i) gx[c * m + i] += k * gy[c * m + i];
      }
    }
  };
  return Tensor::make_result(x.shape(), std::move(out), std::move(node));
}

Tensor upsample_nearest(const Tensor& x, std::int64_t height, std::int64_t width) {
  if (x.rank() != 3) throw ShapeMismatch("upsample: input " + shape_str(x.shape()));
  const auto channels = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 1 || w < 1 || height % h != 0 || width % w != 0) {
    throw NonIntegerScale(shape_str(x.shape()) + " -> " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  std::vector<double> out(static_cast<std::size_t>(channels * height * width));
  auto xd = x.data();
  // Pixel (u, v) reads source (floor(v*h/H), floor(u*w/W)).
  for (std::int64_t c = 0; c < channels; ++c)
    for (std::int64_t v = 0; v < height; ++v)
      for (std::int64_t u = 0; u < width; ++u)
        out[(c * height + v) * width + u] = xd[(c * h + v * h / height) * w + u * w / width];
  auto node = make_node("upsample_nearest", {x});
  node->backward = [x, channels, h, w, height, width](std::span<const double> gy) mutable {
    auto gx = x.grad();
    for (std::int64_t c = 0; c < channels; ++c)
      for (std::int64_t v = 0; v < height; ++v)
        for (std::int64_t u = 0; u < width; ++u)
          gx[(c * h + v * h / height) * w + u * w / width] += gy[(c * height + v) * width + u];
  };
  return Tensor::make_result({channels, height, width}, std::move(out), std::move(node));
}

Tensor scatter_mean(const Tensor& features,
                    std::shared_ptr<const kernels::ScatterIndex> idx,
                    const std::array<int, 3>& volume_dims) {
  if (features.rank() != 3 || features.dim(1) * features.dim(2) != idx->num_pixels) {
    throw ShapeMismatch("scatter_mean: features " + shape_str(features.shape()) +
                        " vs table of " + std::to_string(idx->num_pixels) + " pixels");
  }
  const std::int64_t voxels = std::int64_t{volume_dims[0]} * volume_dims[1] * volume_dims[2];
  if (voxels != idx->num_voxels) {
    throw TableMismatch("volume dims disagree with table voxel count");
  }
  const int channels = static_cast<int>(features.dim(0));
  std::vector<double> out(static_cast<std::size_t>(channels * voxels));
  kernels::parallel::scatter_mean_forward(*idx, channels, features.data(), out);
  auto node = make_node("scatter_mean", {features});
  node->backward = [features, idx, channels](std::span<const double> gv) mutable {
    kernels::parallel::scatter_mean_backward(*idx, channels, gv, features.grad());
  };
  return Tensor::make_result({channels, volume_dims[0], volume_dims[1], volume_dims[2]},
                             std::move(out), std::move(node));
}

MaskedLoss masked_softmax_ce(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() < 1) throw ShapeMismatch("masked_softmax_ce: scalar logits");
  const auto classes = logits.dim(0);
  const auto positions = logits.numel() / std::max<std::int64_t>(classes, 1);
  if (static_cast<std::int64_t>(targets.size()) != positions) {
    throw ShapeMismatch("masked_softmax_ce: " + std::to_string(targets.size()) +
                        " targets for logits " + shape_str(logits.shape()));
  }
  auto z = logits.data();
  std::int64_t included = 0;
  double total = 0.0;
  for (std::int64_t s = 0; s < positions; ++s) {
    int t = targets[s];
    if (t < 0) continue;
    if (t >= classes) {
      throw ShapeMismatch("masked_softmax_ce: target " + std::to_string(t) + " >= " +
                          std::to_string(classes) + " classes");
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < classes; ++k) zmax = std::max(zmax, z[k * positions + s]);
    double acc = 0.0;
    for (std::int64_t k = 0; k < classes; ++k) acc += std::exp(z[k * positions + s] - zmax);
    total += zmax + std::log(acc) - z[t * positions + s];
    ++included;
  }
  if (included == 0) throw EmptyMask("no voxel included in the loss");
  const double norm = 1.0 / double(included);
  std::vector<int> saved(targets.begin(), targets.end());
  auto node = make_node("masked_softmax_ce", {logits});
  node->backward = [logits, saved = std::move(saved), classes, positions,
                    norm](std::span<const double> g) mutable {
    auto z = logits.data();
    auto gz = logits.grad();
    const double scale = g[0] * norm;
    for (std::int64_t s = 0; s < positions; ++s) {
      int t = saved[s];
      if (t < 0) continue;
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::int64_t k = 0; k < classes; ++k) zmax = std::max(zmax, z[k * positions + s]);
      double acc = 0.0;
      for (std::int64_t k = 0; k < classes; ++k) acc += std::exp(z[k * positions + s] - zmax);
      for (std::int64_t k = 0; k < classes; ++k) {
        double p = std::exp(z[k * positions + s] - zmax) / acc;
        gz[k * positions + s] += scale * (p - (k == t ? 1.0 : 0.0));
      }
    }
  };
  return {Tensor::make_result({}, {total * norm}, std::move(node)), included};
}

}  // namespace vvnet
