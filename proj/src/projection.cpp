#include "vvnet/projection.hpp"

#include "vvnet/error.hpp"
#include "vvnet/ops.hpp"

namespace vvnet {

ProjectionTable build_projection_table(const DepthImage& depth, const CameraIntrinsics& k,
                                        const VoxelGrid& grid) {
  grid.validate();
  auto idx = std::make_shared<kernels::ScatterIndex>();
  idx->num_pixels = depth.pixels();
  idx->num_voxels = grid.count();
  idx->pixel_voxel.assign(static_cast<std::size_t>(idx->num_pixels), -1);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(idx->num_voxels), 0);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.valid(u, v)) continue;
      auto cell = voxel_of(unproject(u, v, depth.at(u, v), k), grid);
      if (!cell) continue;
      auto vox = grid.linear(*cell);
      idx->pixel_voxel[std::size_t(v) * depth.width + u] = vox;
      ++counts[vox];
    }
  }
  idx->offsets.assign(counts.size() + 1, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) idx->offsets[i + 1] = idx->offsets[i] + counts[i];
  idx->pixels.resize(static_cast<std::size_t>(idx->offsets.back()));
  std::vector<std::int64_t> cursor(idx->offsets.begin(), idx->offsets.end() - 1);
  // Pixel-order fill keeps every contributor list sorted.
  for (std::int64_t p = 0; p < idx->num_pixels; ++p) {
    auto vox = idx->pixel_voxel[p];
    if (vox >= 0) idx->pixels[cursor[vox]++] = p;
  }

  ProjectionTable t;
  t.width = depth.width;
  t.height = depth.height;
  t.grid = grid;
  t.index = std::move(idx);
  return t;
}

Tensor upsample_nn(const Tensor& features, int height, int width) {
  return upsample_nearest(features, height, width);
}

Tensor project(const Tensor& features, const ProjectionTable& table) {
  if (features.rank() != 3 || features.dim(1) != table.height || features.dim(2) != table.width) {
    throw ShapeMismatch("project: features " + shape_str(features.shape()) + " vs depth " +
                        std::to_string(table.height) + "x" + std::to_string(table.width));
  }
  return scatter_mean(features, table.index, table.grid.dims);
}

Projection project_forward(const Tensor& features, const DepthImage& depth,
                           const CameraIntrinsics& k, const VoxelGrid& grid) {
  auto table = std::make_shared<const ProjectionTable>(build_projection_table(depth, k, grid));
  Tensor up = features;
  if (features.rank() == 3 && (features.dim(1) != depth.height || features.dim(2) != depth.width)) {
    up = upsample_nn(features, depth.height, depth.width);
  }
  return {project(up, *table), table};
}

std::vector<double> project_backward(std::span<const double> grad_volume,
                                     const ProjectionTable& table, int channels,
                                     int feature_height, int feature_width) {
  const auto& idx = *table.index;
  if (static_cast<std::int64_t>(grad_volume.size()) != channels * idx.num_voxels) {
    throw TableMismatch("gradient of " + std::to_string(grad_volume.size()) +
                        " values for table of " + std::to_string(idx.num_voxels) +
                        " voxels x " + std::to_string(channels) + " channels");
  }
  if (feature_height < 1 || feature_width < 1 || table.height % feature_height != 0 ||
      table.width % feature_width != 0) {
    throw NonIntegerScale("feature map " + std::to_string(feature_height) + "x" +
                          std::to_string(feature_width));
  }
  std::vector<double> per_pixel(static_cast<std::size_t>(channels * idx.num_pixels), 0.0);
  kernels::parallel::scatter_mean_backward(idx, channels, grad_volume, per_pixel);
  // Adjoint of nearest-neighbour upsampling: sum each block.
  std::vector<double> out(static_cast<std::size_t>(channels) * feature_height * feature_width,
                          0.0);
  const int H = table.height, W = table.width;
  for (int c = 0; c < channels; ++c)
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u)
        out[(std::size_t(c) * feature_height + std::size_t(v) * feature_height / H) *
                feature_width +
            std::size_t(u) * feature_width / W] +=
            per_pixel[(std::size_t(c) * H + v) * W + u];
  return out;
}

}  // namespace vvnet
