#pragma once

// Differentiable operations. Tensors carry no batch axis: images are
// [C, H, W] and volumes [C, X, Y, Z].

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "vvnet/kernels.hpp"
#include "vvnet/tensor.hpp"

namespace vvnet {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Concatenates along axis 0 (channels).
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);

/// Stride/padding/dilation for 2 or 3 spatial axes.
struct ConvOptions {
  std::vector<int> stride;
  std::vector<int> padding;
  std::vector<int> dilation;

  static ConvOptions uniform(int rank, int stride, int padding, int dilation = 1);
};

// x [C, s...], weight [O, C, k...], bias [O] (may be undefined).
Tensor conv(const Tensor& x, const Tensor& weight, const Tensor& bias,
            const ConvOptions& opt);
// Adjoint of conv with the same options; weight [C_in, C_out, k...].
Tensor conv_transpose(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const ConvOptions& opt);

// Non-overlapping windows of 2 along every spatial axis.
Tensor max_pool2(const Tensor& x);
Tensor avg_pool2(const Tensor& x);

/// Per-channel normalisation over all spatial positions. In training mode
/// the batch statistics are used and the running statistics updated in place.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training,
                  double eps, double momentum);

// [C, h, w] -> [C, H, W]; H, W integer multiples of h, w.
Tensor upsample_nearest(const Tensor& x, std::int64_t height, std::int64_t width);

// features [C, H, W] with H*W == idx.num_pixels -> [C, volume_dims...].
Tensor scatter_mean(const Tensor& features,
                    std::shared_ptr<const kernels::ScatterIndex> idx,
                    const std::array<int, 3>& volume_dims);

struct MaskedLoss {
  Tensor loss;
  std::int64_t included = 0;
};

/// Mean over included voxels of -log softmax(logits)[target]. `targets` runs
/// over the spatial positions of logits [K, ...] in row-major order; a
/// negative entry excludes the position.
MaskedLoss masked_softmax_ce(const Tensor& logits, std::span<const int> targets);

}  // namespace vvnet

namespace vvnet {

// Running total of convolution multiply-accumulates executed by conv and
// conv_transpose forward passes; used to cross-check count_cost.
std::int64_t conv_mac_count();
void reset_conv_mac_count();

}  // namespace vvnet
