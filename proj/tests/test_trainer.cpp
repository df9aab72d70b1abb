#include <gtest/gtest.h>

#include "vvnet/error.hpp"
#include "vvnet/ops.hpp"
#include "vvnet/trainer.hpp"

using namespace vvnet;

namespace {

struct Fixture {
  std::vector<SceneRecord> scenes;
  TrainOptions opt;
  Fixture(int count = 2) {
    DatasetOptions d;
    for (int i = 0; i < count; ++i) scenes.push_back(make_scene(d, i));
    opt.variant = Variant::kVVNetR60;
    opt.base_channels = 4;
    opt.seed = 3;
  }
  ModelSpec model() const {
    return build(opt.variant,
                 model_config_for(scenes[0], opt.num_classes, opt.base_channels, opt.half_res),
                 opt.seed);
  }
  std::vector<PreparedScene> prepared(const ModelSpec& m) const {
    std::vector<PreparedScene> p;
    for (const auto& s : scenes) p.push_back(prepare_scene(s, m, opt.mode, opt.half_res));
    return p;
  }
};

}  // namespace

TEST(Trainer, TargetsFollowMask) {
  Fixture f(1);
  auto m = f.model();
  auto p = prepare_scene(f.scenes[0], m, InputMode::kDepthNormal, false);
  const auto& v = f.scenes[0].volume;
  std::int64_t allowed = 0;
  for (std::int64_t i = 0; i < v.count(); ++i) {
    const int mask = v.mask[i];
    const bool in = mask == 1 || mask == 2 || mask == 3;
    allowed += in;
    EXPECT_EQ(p.targets[i], in ? int(v.label[i]) : -1);
  }
  EXPECT_EQ(p.included, allowed);
  EXPECT_GT(allowed, 0);
}

TEST(Trainer, ExcludedVoxelsGetNoGradient) {
  Fixture f(1);
  auto m = f.model();
  auto p = prepare_scene(f.scenes[0], m, InputMode::kDepthNormal, false);
  Tensor logits = forward(m, p.input, p.table, true);
  auto ml = masked_softmax_ce(logits, p.targets);
  EXPECT_EQ(ml.included, p.included);
  backward(ml.loss);
  const auto g = logits.grad();
  const std::int64_t voxels = f.scenes[0].volume.count();
  int nonzero_in = 0;
  for (std::int64_t i = 0; i < voxels; ++i) {
    for (int c = 0; c < 5; ++c) {
      const double d = g[c * voxels + i];
      if (p.targets[i] < 0) {
        ASSERT_EQ(d, 0.0) << "voxel " << i;
      } else {
        nonzero_in += d != 0.0;
      }
    }
  }
  EXPECT_GT(nonzero_in, 0);
}

TEST(Trainer, LabelAboveClassCountIsRejected) {
  Fixture f(1);
  f.opt.num_classes = 2;
  auto m = f.model();
  EXPECT_THROW(prepare_scene(f.scenes[0], m, InputMode::kDepthNormal, false), InvalidConfig);
}

TEST(Trainer, ShortRunReducesLoss) {
  Fixture f(1);
  f.opt.iterations = 30;
  auto m = f.model();
  auto log = train(m, f.prepared(m), f.opt);
  ASSERT_EQ(log.size(), 30u);
  EXPECT_EQ(log.front().iteration, 1);
  EXPECT_LT(log.back().loss, 0.5 * log.front().loss);
}

TEST(Trainer, RunsAreReproducible) {
  Fixture f;
  f.opt.iterations = 6;
  f.opt.batch = 2;
  f.opt.lr_decay_at = 3;
  auto run = [&] {
    auto m = f.model();
    auto log = train(m, f.prepared(m), f.opt);
    return std::make_pair(log, encode_checkpoint(m, f.opt.mode));
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.first.size(), b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    EXPECT_EQ(a.first[i].loss, b.first[i].loss);
    EXPECT_EQ(a.first[i].lr, b.first[i].lr);
  }
  EXPECT_EQ(a.first[2].lr, 0.01);
  EXPECT_EQ(a.first[3].lr, 0.001);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, CallbackSeesEveryIteration) {
  Fixture f(1);
  f.opt.iterations = 3;
  auto m = f.model();
  std::vector<int> seen;
  train(m, f.prepared(m), f.opt, [&](const IterationLog& l) { seen.push_back(l.iteration); });
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
}

TEST(Trainer, HalfResolutionInput) {
  Fixture f(1);
  f.opt.half_res = true;
  f.opt.variant = Variant::kVVNetR120;  // one 2D pooling stage fits 40x30
  auto cfg = model_config_for(f.scenes[0], 4, 4, true);
  EXPECT_EQ(cfg.depth_width, 40);
  EXPECT_EQ(cfg.depth_height, 30);
  auto m = f.model();
  auto p = prepare_scene(f.scenes[0], m, InputMode::kDepthNormal, true);
  EXPECT_EQ(p.input.shape(), (Shape{4, 30, 40}));
}

TEST(Trainer, EvaluateAndPredict) {
  Fixture f(1);
  auto m = f.model();
  auto p = f.prepared(m);
  auto pred = predict(m, p[0]);
  EXPECT_EQ(static_cast<std::int64_t>(pred.size()), f.scenes[0].volume.count());
  for (auto c : pred) EXPECT_LE(c, 4);
  auto r = evaluate_model(m, p);
  EXPECT_GE(r.sc.iou, 0.0);
  EXPECT_LE(r.sc.iou, 1.0);
}
