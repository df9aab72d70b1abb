#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vvnet/geometry.hpp"

namespace vvnet {

struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p) const;
  bool overlaps(const Box& o) const;
  // Entry distance along origin + t*dir for t > 0, if the ray hits.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const;
};

struct SceneObject {
  int class_id = 0;
  Box box;
};

/// Room boundary slabs plus free-standing objects, all axis-aligned, in
/// camera coordinates with the camera at the origin looking down +z.
struct SceneSpec {
  Box room;
  std::vector<SceneObject> slabs;    // floor, ceiling, walls
  std::vector<SceneObject> objects;  // pairwise disjoint
};

/// Mask codes of a LabelVolume.
enum class VoxelMask : std::uint8_t {
  kVisibleFree = 0,
  kOccludedEmpty = 1,
  kVisibleSurface = 2,
  kOccludedOccupied = 3,
  kOutsideView = 4,
  kOutsideRoom = 5,
};

/// Per-voxel labels (0 = empty) and mask codes, both in VoxelGrid::linear
/// order (z fastest). Files use x-fastest order; see io.hpp.
struct LabelVolume {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> label;
  std::vector<std::uint8_t> mask;

  LabelVolume() = default;
  explicit LabelVolume(std::array<int, 3> d);

  std::int64_t count() const { return std::int64_t{dims[0]} * dims[1] * dims[2]; }
  std::int64_t linear(int x, int y, int z) const {
    return (std::int64_t{x} * dims[1] + y) * dims[2] + z;
  }
};

/// Class ids for the generated scenes, clamped into 1..num_classes.
struct ClassMap {
  int ceiling = 1;
  int floor = 2;
  int wall = 3;
  int first_object = 4;
  int last_object = 4;

  static ClassMap for_classes(int num_classes);
};

/// Everything the generator needs besides the seed.
struct SceneLayout {
  VoxelGrid grid;  // label grid; the room is aligned to it
  int num_classes = 4;
  int min_objects = 2;
  int max_objects = 6;

  static SceneLayout desk();
};

SceneSpec gen_scene(std::uint64_t seed, const SceneLayout& layout = SceneLayout::desk());

struct RenderOptions {
  double noise_sigma = 0.0;  // Gaussian depth noise in meters; 0 disables
  std::uint64_t noise_seed = 0;
};

DepthImage render_depth(const SceneSpec& scene, const CameraIntrinsics& k, int width,
                        int height, const RenderOptions& opt = {});

/// Class of the object or slab containing each voxel center (objects take
/// priority over slabs, earlier entries over later ones); 0 where none.
std::vector<std::uint8_t> voxelize_labels(const SceneSpec& scene, const VoxelGrid& grid);

/// Fills the mask codes from the observed depth: voxels holding a depth
/// sample are visible surface; voxels crossed by a ray before its hit are
/// visible free space; the rest of the frustum inside the room is occluded.
LabelVolume classify_visibility(const std::vector<std::uint8_t>& labels, const DepthImage& depth,
                                const CameraIntrinsics& k, const VoxelGrid& grid,
                                const Box& room);

/// Intrinsics used by the generator for a given raster size.
CameraIntrinsics default_intrinsics(int width, int height);

}  // namespace vvnet
