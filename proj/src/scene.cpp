#include "vvnet/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vvnet/error.hpp"
#include "vvnet/random.hpp"

namespace vvnet {

namespace {

// Box faces sit this fraction of a voxel inside voxel boundaries, so every
// surface point falls in a voxel whose center is inside the same box.
constexpr double kInset = 0.1;

Box cell_box(const VoxelGrid& g, VoxelIndex lo, VoxelIndex hi) {
  const double d = kInset * g.voxel_size;
  return {{g.origin.x + lo[0] * g.voxel_size + d, g.origin.y + lo[1] * g.voxel_size + d,
           g.origin.z + lo[2] * g.voxel_size + d},
          {g.origin.x + hi[0] * g.voxel_size - d, g.origin.y + hi[1] * g.voxel_size - d,
           g.origin.z + hi[2] * g.voxel_size - d}};
}

}  // namespace

bool Box::contains(const Vec3& p) const {
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

bool Box::overlaps(const Box& o) const {
  return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y && lo.z < o.hi.z &&
         o.lo.z < hi.z;
}

std::optional<double> Box::intersect(const Vec3& origin, const Vec3& dir) const {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double l[3] = {lo.x, lo.y, lo.z};
  const double h[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < l[a] || o[a] > h[a]) return std::nullopt;
      continue;
    }
    double t1 = (l[a] - o[a]) / d[a];
    double t2 = (h[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || !(t_near > 0.0)) return std::nullopt;
  return t_near;
}

LabelVolume::LabelVolume(std::array<int, 3> d)
    : dims(d),
      label(static_cast<std::size_t>(std::int64_t{d[0]} * d[1] * d[2]), 0),
      mask(label.size(), 0) {}

ClassMap ClassMap::for_classes(int n) {
  if (n < 1) throw InvalidConfig("num_classes must be >= 1");
  ClassMap m;
  m.ceiling = 1;
  m.floor = std::min(2, n);
  m.wall = std::min(3, n);
  m.first_object = std::min(4, n);
  m.last_object = n;
  return m;
}

SceneLayout SceneLayout::desk() {
  SceneLayout l;
  l.grid.origin = {-2.0, -1.2, 0.0};
  l.grid.voxel_size = 0.4;
  l.grid.dims = {10, 6, 10};
  l.num_classes = 4;
  return l;
}

CameraIntrinsics default_intrinsics(int width, int height) {
  return {0.8 * width, 0.8 * width, (width - 1) / 2.0, (height - 1) / 2.0};
}

SceneSpec gen_scene(std::uint64_t seed, const SceneLayout& layout) {
  const auto& g = layout.grid;
  g.validate();
  if (g.dims[0] < 4 || g.dims[1] < 3 || g.dims[2] < 4) {
    throw InvalidConfig("grid too small for a room");
  }
  const auto classes = ClassMap::for_classes(layout.num_classes);
  Rng rng(seed);
  const int X = g.dims[0], Y = g.dims[1], Z = g.dims[2];

  // Room footprint in voxel units; it starts one voxel behind the camera.
  const int x0 = rng.uniform_int(0, 1);
  const int x1 = X - rng.uniform_int(0, 1);
  const int z0 = -1;
  const int z1 = Z - rng.uniform_int(0, 2);

  SceneSpec s;
  s.room = {{g.origin.x + x0 * g.voxel_size, g.origin.y, g.origin.z + z0 * g.voxel_size},
            {g.origin.x + x1 * g.voxel_size, g.origin.y + Y * g.voxel_size,
             g.origin.z + z1 * g.voxel_size}};
  s.slabs = {
      {classes.floor, cell_box(g, {x0, Y - 1, z0}, {x1, Y, z1})},
      {classes.ceiling, cell_box(g, {x0, 0, z0}, {x1, 1, z1})},
      {classes.wall, cell_box(g, {x0, 0, z0}, {x0 + 1, Y, z1})},
      {classes.wall, cell_box(g, {x1 - 1, 0, z0}, {x1, Y, z1})},
      {classes.wall, cell_box(g, {x0, 0, z1 - 1}, {x1, Y, z1})},
  };

  // Objects stand on the floor, in voxel-aligned footprints that never share
  // a cell with each other or with the slabs.
  const int target = rng.uniform_int(layout.min_objects, layout.max_objects);
  std::vector<std::array<int, 4>> footprints;  // x_lo, x_hi, z_lo, z_hi
  for (int attempt = 0; attempt < 1000 && static_cast<int>(s.objects.size()) < target;
       ++attempt) {
    int w = rng.uniform_int(1, 3);
    int d = rng.uniform_int(1, 3);
    int h = rng.uniform_int(1, std::min(3, Y - 2));
    int xa_max = x1 - 1 - w;
    int za_max = z1 - 1 - d;
    if (xa_max < x0 + 1 || za_max < 1) continue;
    int xa = rng.uniform_int(x0 + 1, xa_max);
    int za = rng.uniform_int(1, za_max);
    std::array<int, 4> fp{xa, xa + w, za, za + d};
    bool clash = false;
    for (const auto& o : footprints) {
      if (fp[0] < o[1] && o[0] < fp[1] && fp[2] < o[3] && o[2] < fp[3]) {
        clash = true;
        break;
      }
    }
    int cls = rng.uniform_int(classes.first_object, classes.last_object);
    if (clash) continue;
    footprints.push_back(fp);
    s.objects.push_back({cls, cell_box(g, {xa, Y - 1 - h, za}, {xa + w, Y - 1, za + d})});
  }
  return s;
}

DepthImage render_depth(const SceneSpec& scene, const CameraIntrinsics& k, int width,
                        int height, const RenderOptions& opt) {
  k.validate();
  DepthImage img(width, height);
  Rng noise(opt.noise_seed);
  const Vec3 origin{};
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 dir{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      double best = std::numeric_limits<double>::infinity();
      for (const auto* list : {&scene.objects, &scene.slabs}) {
        for (const auto& o : *list) {
          if (auto t = o.box.intersect(origin, dir); t && *t < best) best = *t;
        }
      }
      if (!std::isfinite(best)) continue;
      // dir.z == 1, so the ray parameter is the z-depth.
      double z = best;
      if (opt.noise_sigma > 0.0) z = std::max(1e-3, z + opt.noise_sigma * noise.normal());
      img.at(u, v) = static_cast<float>(z);
    }
  }
  return img;
}

std::vector<std::uint8_t> voxelize_labels(const SceneSpec& scene, const VoxelGrid& grid) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(grid.count()), 0);
  for (std::int64_t i = 0; i < grid.count(); ++i) {
    const Vec3 c = grid.center(grid.unlinear(i));
    int cls = 0;
    for (const auto* list : {&scene.objects, &scene.slabs}) {
      for (const auto& o : *list) {
        if (o.box.contains(c)) {
          cls = o.class_id;
          break;
        }
      }
      if (cls) break;
    }
    labels[i] = static_cast<std::uint8_t>(cls);
  }
  return labels;
}

LabelVolume classify_visibility(const std::vector<std::uint8_t>& labels, const DepthImage& depth,
                                const CameraIntrinsics& k, const VoxelGrid& grid,
                                const Box& room) {
  if (static_cast<std::int64_t>(labels.size()) != grid.count()) {
    throw ShapeMismatch("labels do not match grid");
  }
  LabelVolume out(grid.dims);
  out.label = labels;
  std::vector<char> surface(labels.size(), 0), crossed(labels.size(), 0);

  const double step = grid.voxel_size / 4.0;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.valid(u, v)) continue;
      const double d = depth.at(u, v);
      if (auto cell = voxel_of(unproject(u, v, d, k), grid)) surface[grid.linear(*cell)] = 1;
      const Vec3 dir{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const double dt = step / dir.norm();
      for (double t = dt; t < d; t += dt) {
        if (auto cell = voxel_of(dir * t, grid)) crossed[grid.linear(*cell)] = 1;
      }
    }
  }

  for (std::int64_t i = 0; i < grid.count(); ++i) {
    const bool occupied = labels[i] != 0;
    VoxelMask m;
    const Vec3 c = grid.center(grid.unlinear(i));
    const double pu = c.z > 0.0 ? k.fx * c.x / c.z + k.cx : -1.0;
    const double pv = c.z > 0.0 ? k.fy * c.y / c.z + k.cy : -1.0;
    const bool in_view = c.z > 0.0 && pu >= -0.5 && pu < depth.width - 0.5 && pv >= -0.5 &&
                         pv < depth.height - 0.5;
    if (surface[i] && occupied) {
      m = VoxelMask::kVisibleSurface;
    } else if (!in_view) {
      m = VoxelMask::kOutsideView;
    } else if (!room.contains(c)) {
      m = VoxelMask::kOutsideRoom;
    } else if (crossed[i] || surface[i]) {
      m = occupied ? VoxelMask::kVisibleSurface : VoxelMask::kVisibleFree;
    } else {
      m = occupied ? VoxelMask::kOccludedOccupied : VoxelMask::kOccludedEmpty;
    }
    out.mask[i] = static_cast<std::uint8_t>(m);
  }
  return out;
}

}  // namespace vvnet
