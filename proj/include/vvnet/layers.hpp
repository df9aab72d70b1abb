#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vvnet/ops.hpp"
#include "vvnet/random.hpp"
#include "vvnet/tensor.hpp"

namespace vvnet {

/// A named trainable tensor or persistent buffer, in registration order.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

struct ConvParams {
  Tensor kernel;  // [outC, inC, k...]; for transposed conv [inC, outC, k...]
  Tensor bias;    // [outC]
  ConvOptions options;

  int spatial_rank() const { return static_cast<int>(kernel.rank()) - 2; }
};

/// Fan-in scaled normal kernel (std = sqrt(2 / fan_in)) and zero bias.
ConvParams make_conv(int rank, int in_channels, int out_channels, int kernel,
                     int stride, int padding, int dilation, Rng& rng);
ConvParams make_deconv(int rank, int in_channels, int out_channels, int kernel,
                       int stride, int padding, Rng& rng);

Tensor conv(const Tensor& x, const ConvParams& p);
Tensor deconv(const Tensor& x, const ConvParams& p);

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

BatchNormParams make_batch_norm(int channels);
Tensor batch_norm(const Tensor& x, BatchNormParams& p, bool training);

/// Two 3-per-axis convolutions and an identity shortcut:
/// relu(x + [bn](conv(relu([bn](conv(x)))))).
struct ResBlockParams {
  ConvParams conv1;
  ConvParams conv2;
  std::optional<BatchNormParams> bn1;
  std::optional<BatchNormParams> bn2;
  int dims = 2;
};

// 2D blocks carry batch norm, 3D blocks do not.
ResBlockParams make_resblock(int dims, int channels, int dilation, Rng& rng);
Tensor resnet_block(const Tensor& x, ResBlockParams& p, bool training);

void collect(const std::string& prefix, ConvParams& p, std::vector<NamedTensor>& out);
void collect(const std::string& prefix, BatchNormParams& p, std::vector<NamedTensor>& out);
void collect(const std::string& prefix, ResBlockParams& p, std::vector<NamedTensor>& out);

/// Classical (non-Nesterov) momentum with weight decay folded into the
/// gradient: v <- momentum*v + (g + wd*w); w <- w - lr*v.
struct SgdState {
  std::vector<std::vector<double>> velocity;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

void sgd_step(std::span<Tensor> params, SgdState& state);
void zero_grad(std::span<Tensor> params);

}  // namespace vvnet
