#pragma once

#include <memory>
#include <vector>

#include "vvnet/geometry.hpp"
#include "vvnet/kernels.hpp"
#include "vvnet/tensor.hpp"

namespace vvnet {

/// Recorded pixel -> voxel membership of one depth image on one grid.
/// Each valid, in-grid pixel belongs to exactly one voxel; contributors of
/// a voxel are kept in ascending pixel order.
struct ProjectionTable {
  int width = 0;
  int height = 0;
  VoxelGrid grid;
  std::shared_ptr<const kernels::ScatterIndex> index;

  std::int64_t contributors(std::int64_t voxel) const {
    return index->offsets[voxel + 1] - index->offsets[voxel];
  }
  std::int64_t voxel_of_pixel(int u, int v) const {
    return index->pixel_voxel[std::size_t(v) * width + u];
  }
};

ProjectionTable build_projection_table(const DepthImage& depth, const CameraIntrinsics& k,
                                        const VoxelGrid& grid);

/// Nearest-neighbour upsampling of a [C, h, w] feature stack.
Tensor upsample_nn(const Tensor& features, int height, int width);

/// Averages [C, H, W] features (already at depth resolution) into the table's
/// grid. Output [C, X, Y, Z]; voxels without contributors are zero.
Tensor project(const Tensor& features, const ProjectionTable& table);

struct Projection {
  Tensor volume;
  std::shared_ptr<const ProjectionTable> table;
};

/// Upsamples `features` to the depth resolution when needed, then projects.
Projection project_forward(const Tensor& features, const DepthImage& depth,
                           const CameraIntrinsics& k, const VoxelGrid& grid);

/// Gradient of project_forward with respect to the (pre-upsample) feature
/// stack of shape [channels, fh, fw], given the volume gradient.
std::vector<double> project_backward(std::span<const double> grad_volume,
                                     const ProjectionTable& table, int channels,
                                     int feature_height, int feature_width);

}  // namespace vvnet
