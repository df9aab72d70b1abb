#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vvnet {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3&) const = default;
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

/// Pinhole intrinsics in pixels. Camera frame: x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
  CameraIntrinsics scaled(double factor) const;
};

/// Per-pixel z-depth in meters, row-major; 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;

  DepthImage() = default;
  DepthImage(int w, int h, float fill = 0.0f);

  float at(int u, int v) const { return depth[std::size_t(v) * width + u]; }
  float& at(int u, int v) { return depth[std::size_t(v) * width + u]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0f; }
  std::int64_t pixels() const { return std::int64_t{width} * height; }
};

/// Unit normals facing the camera; zero where undefined.
struct NormalMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> normal;

  const Vec3& at(int u, int v) const { return normal[std::size_t(v) * width + u]; }
};

using VoxelIndex = std::array<int, 3>;

/// Axis-aligned grid in camera coordinates. Voxel (i,j,k) covers
/// [origin + (i,j,k)*size, origin + (i+1,j+1,k+1)*size).
struct VoxelGrid {
  Vec3 origin;
  double voxel_size = 1.0;
  std::array<int, 3> dims{0, 0, 0};

  void validate() const;
  std::int64_t count() const { return std::int64_t{dims[0]} * dims[1] * dims[2]; }
  Vec3 center(const VoxelIndex& v) const;
  bool contains(const Vec3& p) const;
  // Same origin and extent, voxel size multiplied by `factor`.
  VoxelGrid rescaled(double factor) const;
  // Row-major [X, Y, Z] order (z fastest), the layout of volume tensors.
  std::int64_t linear(const VoxelIndex& v) const {
    return (std::int64_t{v[0]} * dims[1] + v[1]) * dims[2] + v[2];
  }
  VoxelIndex unlinear(std::int64_t i) const;
};

Vec3 unproject(double u, double v, double z, const CameraIntrinsics& k);
NormalMap compute_normals(const DepthImage& d, const CameraIntrinsics& k);
std::optional<VoxelIndex> voxel_of(const Vec3& p, const VoxelGrid& g);
double suggest_voxel_size(const DepthImage& d, const CameraIntrinsics& k);
DepthImage downsample_depth(const DepthImage& d, int factor = 2);

/// Camera intrinsics plus grid, as stored in ".cam" files.
struct CameraGrid {
  CameraIntrinsics camera;
  VoxelGrid grid;
};

/// Parses "key=value" lines. Blank lines and lines starting with '#' are
/// skipped; duplicate keys are rejected.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& source);

CameraGrid parse_camera_grid(const std::string& text, const std::string& source = "<string>");
std::string format_camera_grid(const CameraGrid& cg);
CameraGrid read_camera_grid(const std::string& path);
void write_camera_grid(const std::string& path, const CameraGrid& cg);

}  // namespace vvnet
