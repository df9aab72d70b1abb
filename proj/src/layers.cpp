#include "vvnet/layers.hpp"

#include <cmath>

#include "vvnet/error.hpp"

namespace vvnet {

namespace {

Shape kernel_shape(int rank, int a, int b, int k) {
  Shape s{a, b};
  for (int i = 0; i < rank; ++i) s.push_back(k);
  return s;
}

Tensor he_normal(Shape shape, double fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / fan_in);
  std::vector<double> values(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : values) v = std_dev * rng.normal();
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace

ConvParams make_conv(int rank, int in_channels, int out_channels, int kernel,
                     int stride, int padding, int dilation, Rng& rng) {
  if (rank != 2 && rank != 3) throw InvalidConfig("conv rank must be 2 or 3");
  double fan_in = in_channels * std::pow(kernel, rank);
  ConvParams p;
  p.kernel = he_normal(kernel_shape(rank, out_channels, in_channels, kernel), fan_in, rng);
  p.bias = Tensor::zeros({out_channels}, true);
  p.options = ConvOptions::uniform(rank, stride, padding, dilation);
  return p;
}

ConvParams make_deconv(int rank, int in_channels, int out_channels, int kernel,
                       int stride, int padding, Rng& rng) {
  if (rank != 2 && rank != 3) throw InvalidConfig("deconv rank must be 2 or 3");
  // Each output sees about (kernel/stride)^rank taps per input channel.
  double fan_in = in_channels * std::pow(double(kernel) / stride, rank);
  ConvParams p;
  p.kernel = he_normal(kernel_shape(rank, in_channels, out_channels, kernel), fan_in, rng);
  p.bias = Tensor::zeros({out_channels}, true);
  p.options = ConvOptions::uniform(rank, stride, padding, 1);
  return p;
}

Tensor conv(const Tensor& x, const ConvParams& p) {
  return conv(x, p.kernel, p.bias, p.options);
}

Tensor deconv(const Tensor& x, const ConvParams& p) {
  return conv_transpose(x, p.kernel, p.bias, p.options);
}

BatchNormParams make_batch_norm(int channels) {
  BatchNormParams p;
  p.gamma = Tensor::full({channels}, 1.0, true);
  p.beta = Tensor::zeros({channels}, true);
  p.running_mean = Tensor::zeros({channels});
  p.running_var = Tensor::full({channels}, 1.0);
  return p;
}

Tensor batch_norm(const Tensor& x, BatchNormParams& p, bool training) {
  return batch_norm(x, p.gamma, p.beta, p.running_mean, p.running_var, training, p.eps,
                    p.momentum);
}

ResBlockParams make_resblock(int dims, int channels, int dilation, Rng& rng) {
  ResBlockParams p;
  p.dims = dims;
  p.conv1 = make_conv(dims, channels, channels, 3, 1, dilation, dilation, rng);
  p.conv2 = make_conv(dims, channels, channels, 3, 1, dilation, dilation, rng);
  if (dims == 2) {
    p.bn1 = make_batch_norm(channels);
    p.bn2 = make_batch_norm(channels);
  }
  return p;
}

Tensor resnet_block(const Tensor& x, ResBlockParams& p, bool training) {
  if (x.rank() != static_cast<std::size_t>(p.dims) + 1 || x.dim(0) != p.conv1.kernel.dim(1)) {
    throw ShapeMismatch("resnet_block: input " + shape_str(x.shape()) + " for " +
                        std::to_string(p.conv1.kernel.dim(1)) + "-channel " +
                        std::to_string(p.dims) + "D block");
  }
  Tensor h = conv(x, p.conv1);
  if (p.bn1) h = batch_norm(h, *p.bn1, training);
  h = relu(h);
  h = conv(h, p.conv2);
  if (p.bn2) h = batch_norm(h, *p.bn2, training);
  return relu(add(x, h));
}

void collect(const std::string& prefix, ConvParams& p, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".kernel", p.kernel, true});
  out.push_back({prefix + ".bias", p.bias, true});
}

void collect(const std::string& prefix, BatchNormParams& p, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".gamma", p.gamma, true});
  out.push_back({prefix + ".beta", p.beta, true});
  out.push_back({prefix + ".running_mean", p.running_mean, false});
  out.push_back({prefix + ".running_var", p.running_var, false});
}

void collect(const std::string& prefix, ResBlockParams& p, std::vector<NamedTensor>& out) {
  collect(prefix + ".conv1", p.conv1, out);
  if (p.bn1) collect(prefix + ".bn1", *p.bn1, out);
  collect(prefix + ".conv2", p.conv2, out);
  if (p.bn2) collect(prefix + ".bn2", *p.bn2, out);
}

void sgd_step(std::span<Tensor> params, SgdState& state) {
  if (state.velocity.size() != params.size()) {
    state.velocity.assign(params.size(), {});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& v = state.velocity[i];
    if (v.size() != static_cast<std::size_t>(p.numel())) v.assign(p.numel(), 0.0);
    auto w = p.data();
    auto g = p.grad();
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = state.momentum * v[k] + (g[k] + state.weight_decay * w[k]);
      w[k] -= state.lr * v[k];
    }
  }
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace vvnet
