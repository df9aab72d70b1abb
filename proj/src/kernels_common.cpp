#include "vvnet/kernels.hpp"

namespace vvnet::kernels {

Index3 ConvGeometry::out() const {
  Index3 o{};
  for (int a = 0; a < 3; ++a) {
    o[a] = (in[a] + 2 * pad[a] - dilation[a] * (kernel[a] - 1) - 1) / stride[a] + 1;
  }
  return o;
}

std::int64_t ConvGeometry::in_volume() const {
  return std::int64_t{in[0]} * in[1] * in[2];
}

std::int64_t ConvGeometry::out_volume() const {
  auto o = out();
  return std::int64_t{o[0]} * o[1] * o[2];
}

std::int64_t ConvGeometry::taps() const {
  return std::int64_t{kernel[0]} * kernel[1] * kernel[2];
}

std::int64_t ConvGeometry::weight_size() const {
  return std::int64_t{out_channels} * in_channels * taps();
}

std::int64_t ConvGeometry::macs() const {
  return out_volume() * weight_size();
}

Index3 PoolGeometry::out() const {
  return {in[0] / window[0], in[1] / window[1], in[2] / window[2]};
}

std::int64_t PoolGeometry::in_volume() const {
  return std::int64_t{in[0]} * in[1] * in[2];
}

std::int64_t PoolGeometry::out_volume() const {
  auto o = out();
  return std::int64_t{o[0]} * o[1] * o[2];
}

}  // namespace vvnet::kernels
