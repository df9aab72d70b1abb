#include <gtest/gtest.h>

#include <set>

#include "vvnet/error.hpp"
#include "vvnet/io.hpp"
#include "vvnet/scene.hpp"

using namespace vvnet;

namespace {

bool same_box(const Box& a, const Box& b) { return a.lo == b.lo && a.hi == b.hi; }

// Toy 4^3 scene: an object in front of a back wall, seen by a wide camera.
struct Toy {
  VoxelGrid grid{{-2, -2, 0}, 1.0, {4, 4, 4}};
  CameraIntrinsics k{2, 2, 3.5, 3.5};
  SceneSpec scene;
  Toy() {
    scene.room = {{-2, -2, -1}, {2, 2, 4}};
    scene.slabs = {{3, {{-2, -2, 3.1}, {2, 2, 3.9}}}};
    scene.objects = {{4, {{-0.9, -0.9, 1.1}, {1.9, 1.9, 1.9}}}};
  }
};

}  // namespace

TEST(GenScene, DeterministicPerSeed) {
  SceneSpec a = gen_scene(42), b = gen_scene(42);
  ASSERT_EQ(a.objects.size(), b.objects.size());
  EXPECT_TRUE(same_box(a.room, b.room));
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    EXPECT_TRUE(same_box(a.objects[i].box, b.objects[i].box));
    EXPECT_EQ(a.objects[i].class_id, b.objects[i].class_id);
  }
}

TEST(GenScene, EmptyRoomHasOnlySlabClasses) {
  SceneLayout l = SceneLayout::desk();
  l.min_objects = l.max_objects = 0;
  SceneSpec s = gen_scene(3, l);
  EXPECT_TRUE(s.objects.empty());
  auto labels = voxelize_labels(s, l.grid);
  std::set<int> seen(labels.begin(), labels.end());
  for (int c : seen) EXPECT_TRUE(c == 0 || c == 1 || c == 2 || c == 3) << c;
}

TEST(GenScene, ObjectsDisjointInsideRoomAndCountInRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneSpec s = gen_scene(seed);
    EXPECT_GE(s.objects.size(), 2u);
    EXPECT_LE(s.objects.size(), 6u);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const Box& b = s.objects[i].box;
      EXPECT_TRUE(s.room.contains(b.lo) && s.room.contains(b.hi));
      EXPECT_GE(s.objects[i].class_id, 1);
      EXPECT_LE(s.objects[i].class_id, 4);
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
        EXPECT_FALSE(b.overlaps(s.objects[j].box)) << "seed " << seed;
      }
      for (const auto& slab : s.slabs) EXPECT_FALSE(b.overlaps(slab.box));
    }
  }
}

TEST(ClassMap, ClampsIntoRange) {
  auto m = ClassMap::for_classes(2);
  EXPECT_EQ(m.ceiling, 1);
  EXPECT_EQ(m.floor, 2);
  EXPECT_EQ(m.wall, 2);
  EXPECT_EQ(m.first_object, 2);
  EXPECT_THROW(ClassMap::for_classes(0), InvalidConfig);
}

TEST(RenderDepth, BackWallHandRaycast) {
  SceneSpec s;
  s.room = {{-2, -2, -1}, {2, 2, 4.5}};
  s.slabs = {{3, {{-2, -2, 4.0}, {2, 2, 4.5}}}};
  DepthImage d = render_depth(s, {10, 10, 4, 4}, 9, 9);
  EXPECT_EQ(d.at(4, 4), 4.0f);
  // Fronto-parallel wall: every pixel that hits it reads z = 4.
  for (float z : d.depth) EXPECT_EQ(z, 4.0f);
}

TEST(RenderDepth, InsertedObjectNeverIncreasesDepth) {
  SceneLayout l = SceneLayout::desk();
  l.min_objects = l.max_objects = 0;
  SceneSpec s = gen_scene(9, l);
  const auto k = default_intrinsics(40, 30);
  DepthImage before = render_depth(s, k, 40, 30);
  s.objects.push_back({4, {{-0.5, 0.0, 1.0}, {0.5, 1.1, 1.5}}});
  DepthImage after = render_depth(s, k, 40, 30);
  int closer = 0;
  for (std::size_t i = 0; i < before.depth.size(); ++i) {
    EXPECT_LE(after.depth[i], before.depth[i]);
    closer += after.depth[i] < before.depth[i];
  }
  EXPECT_GT(closer, 0);
  EXPECT_EQ(after.at(20, 20), 1.0f);  // the object's front face
}

TEST(Voxelize, MatchesBruteForceCenterEnumeration) {
  const auto l = SceneLayout::desk();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec s = gen_scene(seed, l);
    auto labels = voxelize_labels(s, l.grid);
    std::map<int, int> expect, got;
    for (int x = 0; x < 10; ++x)
      for (int y = 0; y < 6; ++y)
        for (int z = 0; z < 10; ++z) {
          Vec3 c{-2 + 0.4 * (x + 0.5), -1.2 + 0.4 * (y + 0.5), 0.4 * (z + 0.5)};
          int cls = 0;
          for (const auto& o : s.objects) {
            if (!cls && c.x >= o.box.lo.x && c.x <= o.box.hi.x && c.y >= o.box.lo.y &&
                c.y <= o.box.hi.y && c.z >= o.box.lo.z && c.z <= o.box.hi.z) {
              cls = o.class_id;
            }
          }
          for (const auto& o : s.slabs) {
            if (!cls && c.x >= o.box.lo.x && c.x <= o.box.hi.x && c.y >= o.box.lo.y &&
                c.y <= o.box.hi.y && c.z >= o.box.lo.z && c.z <= o.box.hi.z) {
              cls = o.class_id;
            }
          }
          ++expect[cls];
        }
    for (auto v : labels) ++got[v];
    EXPECT_EQ(got, expect) << "seed " << seed;
  }
}

TEST(ClassifyVisibility, ToyRaycast) {
  Toy t;
  DepthImage d = render_depth(t.scene, t.k, 8, 8);
  auto labels = voxelize_labels(t.scene, t.grid);
  LabelVolume v = classify_visibility(labels, d, t.k, t.grid, t.scene.room);
  auto mask = [&](int x, int y, int z) { return int(v.mask[v.linear(x, y, z)]); };
  EXPECT_EQ(mask(2, 2, 0), 0);  // empty, in front of the object
  EXPECT_EQ(mask(2, 2, 1), 2);  // object front face
  EXPECT_EQ(mask(2, 2, 2), 1);  // empty, hidden behind the object
  EXPECT_EQ(mask(2, 2, 3), 3);  // wall, hidden behind the object
  EXPECT_EQ(v.label[v.linear(2, 2, 1)], 4);
  EXPECT_EQ(v.label[v.linear(2, 2, 3)], 3);
}

TEST(ClassifyVisibility, OutsideViewAndOutsideRoom) {
  Toy t;
  t.scene.room = {{-2, -2, -1}, {1, 2, 4}};  // x >= 1 is outside the room
  DepthImage d = render_depth(t.scene, t.k, 8, 8);
  LabelVolume v = classify_visibility(voxelize_labels(t.scene, t.grid), d, t.k, t.grid,
                                      t.scene.room);
  // Voxel (0,0,0) centre (-1.5,-1.5,0.5) projects to u = -2.5: outside the image.
  EXPECT_EQ(v.mask[v.linear(0, 0, 0)], 4);
  // Voxel (3,1,3) centre (1.5,-0.5,3.5) is in view but beyond the room's x extent.
  EXPECT_EQ(v.mask[v.linear(3, 1, 3)], 5);
}

TEST(ClassifyVisibility, GeneratedScenesAreConsistent) {
  DatasetOptions opt;
  for (int id = 0; id < 100; ++id) {
    opt.seed = 11;
    SceneRecord r = make_scene(opt, id);
    const auto& v = r.volume;
    const auto& g = opt.layout.grid;
    for (std::int64_t i = 0; i < v.count(); ++i) {
      const int m = v.mask[i];
      ASSERT_LE(m, 5);
      if (m == 2 || m == 3) EXPECT_GE(v.label[i], 1) << "scene " << id << " voxel " << i;
      if (m == 0 || m == 1) EXPECT_EQ(v.label[i], 0) << "scene " << id << " voxel " << i;
    }
    for (int y = 0; y < r.depth.height; ++y) {
      for (int x = 0; x < r.depth.width; ++x) {
        if (!r.depth.valid(x, y)) continue;
        auto cell = voxel_of(unproject(x, y, r.depth.at(x, y), opt.camera), g);
        if (!cell) continue;
        EXPECT_EQ(v.mask[g.linear(*cell)], 2) << "scene " << id << " pixel " << x << "," << y;
      }
    }
  }
}

TEST(ClassifyVisibility, EveryRoomPixelHits) {
  DatasetOptions opt;
  SceneRecord r = make_scene(opt, 0);
  for (float z : r.depth.depth) EXPECT_GT(z, 0.0f);
}
