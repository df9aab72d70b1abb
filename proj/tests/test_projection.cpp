#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "vvnet/error.hpp"
#include "vvnet/gradcheck.hpp"
#include "vvnet/ops.hpp"
#include "vvnet/projection.hpp"
#include "vvnet/scene.hpp"
#include "vvnet/suites.hpp"

using namespace vvnet;

namespace {

VoxelGrid cube_grid() { return {{-2, -2, 0}, 0.5, {8, 8, 8}}; }

Tensor random_features(Shape s, Rng& rng, bool grad = false) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::from(std::move(s), std::move(v), grad);
}

}  // namespace

TEST(Upsample, ConstantAndBlocks) {
  Tensor one = Tensor::from({1, 1, 1}, {7});
  Tensor ones = upsample_nn(one, 4, 4);
  for (double v : ones.data()) EXPECT_EQ(v, 7);
  Tensor two = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  std::vector<double> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  Tensor up4 = upsample_nn(two, 4, 4);
  auto up = up4.data();
  EXPECT_EQ(std::vector<double>(up.begin(), up.end()), expect);
  Tensor same2 = upsample_nn(two, 2, 2);
  auto same = same2.data();
  EXPECT_EQ(std::vector<double>(same.begin(), same.end()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(upsample_nn(two, 5, 4), NonIntegerScale);
}

TEST(Projection, TwoPixelsAverage) {
  // Two pixels on the principal axis region land in one voxel.
  DepthImage d(2, 1);
  d.at(0, 0) = 1.2f;
  d.at(1, 0) = 1.3f;
  CameraIntrinsics k{100, 100, 0.5, 0};
  VoxelGrid g{{-1, -1, 0}, 2.0, {1, 1, 1}};
  Tensor f = Tensor::from({1, 1, 2}, {1.0, 3.0});
  Projection p = project_forward(f, d, k, g);
  EXPECT_EQ(p.volume.data()[0], 2.0);
  EXPECT_EQ(p.table->contributors(0), 2);
}

TEST(Projection, EmptyVoxelsAreZeroAndSingleContributorCopies) {
  DepthImage d(4, 4);
  d.at(2, 1) = 1.7f;
  const auto k = default_intrinsics(4, 4);
  Rng rng(5);
  Tensor f = random_features({2, 4, 4}, rng);
  Projection p = project_forward(f, d, k, cube_grid());
  int nonzero = 0;
  const std::int64_t n = cube_grid().count();
  for (std::int64_t v = 0; v < n; ++v) {
    if (p.volume.data()[v] != 0.0) {
      ++nonzero;
      EXPECT_EQ(p.volume.data()[v], f.data()[1 * 4 + 2]);
      EXPECT_EQ(p.volume.data()[n + v], f.data()[16 + 1 * 4 + 2]);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(Projection, AllInvalidGivesZeroVolume) {
  DepthImage d(16, 16);
  Rng rng(1);
  Tensor f = random_features({3, 16, 16}, rng);
  Projection p = project_forward(f, d, default_intrinsics(16, 16), cube_grid());
  for (double v : p.volume.data()) EXPECT_EQ(v, 0.0);
  auto oracle = oracle::project(std::vector<double>(f.data().begin(), f.data().end()), 3, d,
                                default_intrinsics(16, 16), cube_grid());
  for (double v : oracle) EXPECT_EQ(v, 0.0);
}

class ProjectionProperties : public ::testing::TestWithParam<int> {};

TEST_P(ProjectionProperties, MatchesBruteForceOracle) {
  Rng rng(GetParam());
  DepthImage d = oracle::random_depth(16, 16, rng, 0.3, 4.5, 0.2);
  const auto k = default_intrinsics(16, 16);
  Tensor f = random_features({3, 16, 16}, rng);
  Projection p = project_forward(f, d, k, cube_grid());
  auto expect = oracle::project(std::vector<double>(f.data().begin(), f.data().end()), 3, d, k,
                                cube_grid());
  ASSERT_EQ(expect.size(), std::size_t(p.volume.numel()));
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_NEAR(p.volume.data()[i], expect[i], 1e-9);
  }
}

TEST_P(ProjectionProperties, TablePartitionsValidInGridPixels) {
  Rng rng(100 + GetParam());
  DepthImage d = oracle::random_depth(16, 16, rng, 0.3, 4.5, 0.2);
  const auto k = default_intrinsics(16, 16);
  ProjectionTable t = build_projection_table(d, k, cube_grid());
  std::int64_t in_grid = 0;
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      if (d.valid(u, v) && voxel_of(unproject(u, v, d.at(u, v), k), cube_grid())) ++in_grid;
    }
  }
  std::int64_t total = 0;
  std::vector<int> seen(256, 0);
  for (std::int64_t v = 0; v < cube_grid().count(); ++v) {
    total += t.contributors(v);
    for (auto i = t.index->offsets[v]; i < t.index->offsets[v + 1]; ++i) {
      const auto px = t.index->pixels[i];
      ++seen[px];
      EXPECT_EQ(t.index->pixel_voxel[px], v);
      if (i > t.index->offsets[v]) EXPECT_LT(t.index->pixels[i - 1], px);
    }
  }
  EXPECT_EQ(total, in_grid);
  for (int s : seen) EXPECT_LE(s, 1);
}

TEST_P(ProjectionProperties, ConservationAndLinearity) {
  Rng rng(200 + GetParam());
  DepthImage d = oracle::random_depth(16, 16, rng, 0.3, 4.5, 0.2);
  const auto k = default_intrinsics(16, 16);
  ProjectionTable t = build_projection_table(d, k, cube_grid());
  Tensor f1 = random_features({2, 16, 16}, rng);
  Tensor f2 = random_features({2, 16, 16}, rng);
  Tensor v1 = project(f1, t), v2 = project(f2, t);
  Tensor mix = project(add(scale(f1, 0.3), scale(f2, -1.7)), t);
  for (std::int64_t i = 0; i < mix.numel(); ++i) {
    EXPECT_NEAR(mix.data()[i], 0.3 * v1.data()[i] - 1.7 * v2.data()[i], 1e-12);
  }
  const std::int64_t n = cube_grid().count();
  for (int c = 0; c < 2; ++c) {
    double lhs = 0, rhs = 0;
    for (std::int64_t v = 0; v < n; ++v) lhs += v1.data()[c * n + v] * double(t.contributors(v));
    for (std::int64_t p = 0; p < 256; ++p) {
      if (t.index->pixel_voxel[p] >= 0) rhs += f1.data()[c * 256 + p];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST_P(ProjectionProperties, BackwardMatchesAutogradAndFiniteDifferences) {
  Rng rng(300 + GetParam());
  DepthImage d = oracle::random_depth(16, 16, rng, 0.3, 4.5, 0.2);
  const auto k = default_intrinsics(16, 16);
  Tensor f = random_features({3, 8, 8}, rng, true);
  Projection p = project_forward(f, d, k, cube_grid());
  Tensor r = random_features(p.volume.shape(), rng);
  backward(sum(mul(p.volume, r)));
  auto manual = project_backward(r.data(), *p.table, 3, 8, 8);
  for (std::size_t i = 0; i < manual.size(); ++i) EXPECT_NEAR(manual[i], f.grad()[i], 1e-12);

  SuiteResult fd = run_suite("projection", GetParam());
  EXPECT_TRUE(fd.report.passed) << fd.report.summary();
}

INSTANTIATE_TEST_SUITE_P(Seeds, ProjectionProperties, ::testing::Range(1, 11));

TEST(ProjectBackward, MeanSplitsGradient) {
  // Four pixels in one voxel: gradient 8 gives each pixel 2.
  DepthImage d(2, 2, 1.0f);
  CameraIntrinsics k{1000, 1000, 0.5, 0.5};
  VoxelGrid g{{-1, -1, 0}, 2.0, {1, 1, 1}};
  ProjectionTable t = build_projection_table(d, k, g);
  std::vector<double> gv{8.0};
  auto per_pixel = project_backward(gv, t, 1, 2, 2);
  EXPECT_EQ(per_pixel, (std::vector<double>{2, 2, 2, 2}));
  auto pooled = project_backward(gv, t, 1, 1, 1);  // through a 2x upsample
  EXPECT_EQ(pooled, (std::vector<double>{8}));
}

TEST(ProjectBackward, InvalidPixelsGetZeroAndMismatchThrows) {
  DepthImage d(2, 2, 1.0f);
  d.at(1, 1) = 0.0f;
  CameraIntrinsics k{1000, 1000, 0.5, 0.5};
  VoxelGrid g{{-1, -1, 0}, 2.0, {1, 1, 1}};
  ProjectionTable t = build_projection_table(d, k, g);
  std::vector<double> gv{3.0};
  auto per_pixel = project_backward(gv, t, 1, 2, 2);
  EXPECT_EQ(per_pixel, (std::vector<double>{1, 1, 1, 0}));
  std::vector<double> wrong{1.0, 2.0};
  EXPECT_THROW(project_backward(wrong, t, 1, 2, 2), TableMismatch);
  EXPECT_THROW(project_backward(gv, t, 1, 3, 2), NonIntegerScale);
}

TEST(Projection, FeatureSizeMismatch) {
  DepthImage d(4, 4, 1.0f);
  ProjectionTable t = build_projection_table(d, default_intrinsics(4, 4), cube_grid());
  EXPECT_THROW(project(Tensor::zeros({1, 2, 2}), t), ShapeMismatch);
}
