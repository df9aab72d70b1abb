#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "vvnet/error.hpp"
#include "vvnet/io.hpp"
#include "vvnet/model.hpp"
#include "vvnet/ops.hpp"
#include "vvnet/random.hpp"

using namespace vvnet;

namespace {

constexpr Variant kAll[] = {Variant::kVVNet120, Variant::kVVNetR120, Variant::kVVNetR60,
                            Variant::kVVNetR30};

SceneRecord desk_scene(int id = 0) { return make_scene(DatasetOptions{}, id); }

ModelConfig desk_config() {
  auto cfg = ModelConfig::desk();
  cfg.label_grid = DatasetOptions{}.layout.grid;
  return cfg;
}

int count_kind(const ModelSpec& m, LayerKind k, int rank) {
  int n = 0;
  for (const auto& l : m.net.layers()) {
    n += l.kind == k && static_cast<int>(l.out_shape.size()) - 1 == rank;
  }
  return n;
}

std::vector<double> flat_state(ModelSpec& m) {
  std::vector<double> v;
  for (auto& nt : m.net.state()) v.insert(v.end(), nt.tensor.data().begin(), nt.tensor.data().end());
  return v;
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  for (Variant v : kAll) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_FALSE(parse_variant("VVNet-7").has_value());
  EXPECT_EQ(view_stages(Variant::kVVNetR30), 3);
  EXPECT_DOUBLE_EQ(projection_voxel_scale(Variant::kVVNetR30), 2.0);
}

TEST(Model, DeskOutputShape) {
  auto m = build(Variant::kVVNetR120, desk_config(), 1);
  EXPECT_EQ(m.output_shape(), (Shape{5, 10, 6, 10}));
  auto s = desk_scene();
  const auto& k = s.camera.camera;
  Tensor out = forward(m, s.depth, compute_normals(s.depth, k), k, false);
  EXPECT_EQ(out.shape(), (Shape{5, 10, 6, 10}));
}

TEST(Model, AllVariantsShareOutputShapeOnTinyAndFullGrids) {
  for (Variant v : {Variant::kVVNet120, Variant::kVVNetR120, Variant::kVVNetR60}) {
    auto m = build(v, ModelConfig::tiny(), 2);
    EXPECT_EQ(m.output_shape(), (Shape{3, 4, 2, 4})) << variant_name(v);
  }
  for (Variant v : kAll) {
    EXPECT_EQ(build(v, ModelConfig::full_size()).output_shape(), (Shape{12, 60, 36, 60}));
  }
  for (Variant v : {Variant::kVVNet120, Variant::kVVNetR120, Variant::kVVNetR60}) {
    EXPECT_EQ(build(v, desk_config(), 2).output_shape(), (Shape{5, 10, 6, 10}));
  }
}

TEST(Model, DeskThirtyIsRejected) {
  EXPECT_THROW(build(Variant::kVVNetR30, desk_config()), InvalidConfig);
}

TEST(Model, StageTradeOff) {
  auto r120 = build(Variant::kVVNetR120, desk_config());
  auto r60 = build(Variant::kVVNetR60, desk_config());
  auto vv = build(Variant::kVVNet120, desk_config());
  // One pooling stage moves from the volume to the view.
  EXPECT_EQ(count_kind(r60, LayerKind::kMaxPool, 2), count_kind(r120, LayerKind::kMaxPool, 2) + 1);
  EXPECT_EQ(count_kind(r60, LayerKind::kMaxPool, 3), count_kind(r120, LayerKind::kMaxPool, 3) - 1);
  EXPECT_EQ(count_kind(vv, LayerKind::kMaxPool, 3), count_kind(r120, LayerKind::kMaxPool, 3) - 1);
  EXPECT_EQ(count_kind(vv, LayerKind::kMaxPool, 2), count_kind(r120, LayerKind::kMaxPool, 2));
  // Projected grids: 0.5x, 1x of the label grid's voxel size.
  EXPECT_EQ(r120.projection_grid.dims, (std::array<int, 3>{20, 12, 20}));
  EXPECT_EQ(r60.projection_grid.dims, (std::array<int, 3>{10, 6, 10}));
}

TEST(Model, SameSeedSameParameters) {
  auto a = build(Variant::kVVNetR120, desk_config(), 9);
  auto b = build(Variant::kVVNetR120, desk_config(), 9);
  auto c = build(Variant::kVVNetR120, desk_config(), 10);
  EXPECT_EQ(flat_state(a), flat_state(b));
  EXPECT_NE(flat_state(a), flat_state(c));
}

TEST(Model, StateNamesAreUniqueAndPrefixed) {
  auto m = build(Variant::kVVNetR120, desk_config());
  std::set<std::string> names;
  for (auto& nt : m.net.state()) {
    EXPECT_TRUE(names.insert(nt.name).second) << nt.name;
  }
  EXPECT_TRUE(names.count("head.logits.weight") || names.count("head.logits.kernel"))
      << *names.begin();
}

TEST(ReceptiveFieldTest, HandNetworks) {
  Rng rng(0);
  Network n;
  int x = n.input({1, 8, 8, 8});
  x = n.conv(x, 1, 3, 1, 1, 1, rng, "a");
  EXPECT_EQ(receptive_field(n).volume, (std::array<double, 3>{3, 3, 3}));
  x = n.conv(x, 1, 3, 1, 2, 2, rng, "b");
  EXPECT_EQ(receptive_field(n).volume[0], 7);
  x = n.max_pool(n.conv(x, 1, 1, 1, 0, 1, rng, "c"));
  EXPECT_EQ(receptive_field(n).volume[0], 8);
  n.conv(x, 1, 3, 1, 1, 1, rng, "d");  // jump 2 after pooling
  EXPECT_EQ(receptive_field(n).volume[0], 12);
}

TEST(ReceptiveFieldTest, PooledBackboneSeesFurther) {
  auto full = ModelConfig::full_size();
  auto r120 = receptive_field(build(Variant::kVVNetR120, full));
  auto vv = receptive_field(build(Variant::kVVNet120, full));
  for (int a = 0; a < 3; ++a) EXPECT_GT(r120.volume[a], vv.volume[a]);
}

TEST(Cost, EmptyNetwork) {
  Network n;
  n.input({1, 4, 4});
  auto c = count_cost(n);
  EXPECT_EQ(c.macs, 0);
  EXPECT_EQ(c.params, 0);
  EXPECT_EQ(c.peak_activation, 0);
}

TEST(Cost, HandConv) {
  Rng rng(0);
  Network n;
  n.conv(n.input({2, 5, 5}), 3, 3, 1, 1, 1, rng, "c");
  auto c = count_cost(n);
  EXPECT_EQ(c.macs, 3 * 25 * 2 * 9);
  EXPECT_EQ(c.params, 3 * 2 * 9 + 3);
  EXPECT_EQ(c.peak_activation, 75);
}

TEST(Cost, MatchesExecutedGraph) {
  auto s = desk_scene();
  const auto& k = s.camera.camera;
  for (Variant v : {Variant::kVVNet120, Variant::kVVNetR120, Variant::kVVNetR60}) {
    auto m = build(v, desk_config(), 1);
    reset_conv_mac_count();
    Tensor out = forward(m, s.depth, compute_normals(s.depth, k), k, true);
    std::int64_t retained = 0;
    for (const auto& t : trace(out).nodes) retained += t.numel();
    auto c = count_cost(m);
    EXPECT_EQ(c.macs, conv_mac_count()) << variant_name(v);
    EXPECT_EQ(c.peak_activation, retained) << variant_name(v);
    std::int64_t params = 0;
    for (auto& p : m.net.parameters()) params += p.numel();
    EXPECT_EQ(c.params, params);
  }
}

TEST(Cost, FullScaleOrdering) {
  auto full = ModelConfig::full_size();
  auto cost = [&](Variant v) { return count_cost(build(v, full)); };
  auto r30 = cost(Variant::kVVNetR30), r60 = cost(Variant::kVVNetR60),
       r120 = cost(Variant::kVVNetR120), vv = cost(Variant::kVVNet120);
  EXPECT_LT(r30.macs, r60.macs);
  EXPECT_LT(r60.macs, r120.macs);
  EXPECT_LT(r120.macs, vv.macs);
  EXPECT_LT(r30.peak_activation, r60.peak_activation);
  EXPECT_LT(r60.peak_activation, r120.peak_activation);
  EXPECT_LT(r120.peak_activation, vv.peak_activation);
}

TEST(Input, DepthOnlyZeroesNormals) {
  auto s = desk_scene();
  auto normals = compute_normals(s.depth, s.camera.camera);
  Tensor full = make_input(s.depth, normals, InputMode::kDepthNormal);
  Tensor depth_only = make_input(s.depth, normals, InputMode::kDepthOnly);
  const auto hw = s.depth.pixels();
  for (std::int64_t i = 0; i < 4 * hw; ++i) {
    if (i < hw) {
      EXPECT_EQ(depth_only.data()[i], full.data()[i]);
    } else {
      EXPECT_EQ(depth_only.data()[i], 0.0);
    }
  }
  auto m = build(Variant::kVVNetR120, desk_config(), 3);
  auto table = build_projection_table(s.depth, s.camera.camera, m.projection_grid);
  NoGradGuard g;
  Tensor a = forward(m, full, table, false);
  Tensor b = forward(m, depth_only, table, false);
  EXPECT_NE(a.data().front(), b.data().front());
}

TEST(Input, AllInvalidDepthIsDeterministic) {
  DepthImage d(80, 60);
  const auto k = DatasetOptions{}.camera;
  auto m = build(Variant::kVVNetR120, desk_config(), 3);
  NoGradGuard g;
  Tensor a = forward(m, d, compute_normals(d, k), k, false);
  Tensor b = forward(m, d, compute_normals(d, k), k, false);
  EXPECT_EQ(std::vector<double>(a.data().begin(), a.data().end()),
            std::vector<double>(b.data().begin(), b.data().end()));
  for (double v : a.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Checkpoint, RoundTrip) {
  auto path = (std::filesystem::temp_directory_path() / "vvnet_test_ckpt.vvck").string();
  auto m = build(Variant::kVVNetR60, desk_config(), 4);
  save_checkpoint(path, m, InputMode::kDepthOnly);
  CheckpointHeader h;
  auto back = load_checkpoint(path, desk_config().label_grid, &h);
  EXPECT_EQ(h.variant, Variant::kVVNetR60);
  EXPECT_EQ(h.mode, InputMode::kDepthOnly);
  EXPECT_EQ(h.num_classes, 4);
  // Payloads are f32.
  auto stored = flat_state(m);
  for (auto& v : stored) v = static_cast<float>(v);
  EXPECT_EQ(flat_state(back), stored);
  EXPECT_EQ(encode_checkpoint(back, InputMode::kDepthOnly), read_file(path));
}

TEST(Checkpoint, Mismatches) {
  auto m = build(Variant::kVVNetR120, desk_config(), 4);
  auto bytes = encode_checkpoint(m, InputMode::kDepthNormal);

  auto other = build(Variant::kVVNet120, desk_config(), 4);
  EXPECT_THROW(load_checkpoint_into(bytes, "mem", other), VariantMismatch);

  auto cfg = desk_config();
  cfg.base_channels = 4;
  auto narrow = build(Variant::kVVNetR120, cfg, 4);
  auto before = flat_state(narrow);
  EXPECT_THROW(load_checkpoint_into(bytes, "mem", narrow), ShapeMismatch);
  EXPECT_EQ(flat_state(narrow), before);  // nothing copied on failure

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(load_checkpoint_into(cut, "mem", m), TruncatedFile);
  auto bad = bytes;
  bad[0] = 'Z';
  EXPECT_THROW(decode_checkpoint_header(bad, "mem"), BadMagic);
  auto version = bytes;
  version[4] = 99;
  EXPECT_THROW(decode_checkpoint_header(version, "mem"), ParseError);

  VoxelGrid wrong = desk_config().label_grid;
  wrong.dims = {8, 6, 10};
  auto h = decode_checkpoint_header(bytes, "mem");
  EXPECT_THROW(h.config_for(wrong), ShapeMismatch);
}
