#include <gtest/gtest.h>

#include <cmath>

#include "vvnet/error.hpp"
#include "vvnet/layers.hpp"
#include "vvnet/suites.hpp"

using namespace vvnet;

TEST(Sgd, HandComputedStep) {
  Tensor w = Tensor::from({1}, {1.0}, true);
  w.grad()[0] = 0.5;
  std::vector<Tensor> params{w};
  SgdState s;
  sgd_step(params, s);
  EXPECT_NEAR(s.velocity[0][0], 0.5005, 1e-15);
  EXPECT_NEAR(w.data()[0], 0.994995, 1e-15);
}

TEST(Sgd, MomentumAccumulates) {
  Tensor w = Tensor::from({1}, {1.0}, true);
  std::vector<Tensor> params{w};
  SgdState s;
  s.weight_decay = 0.0;
  w.grad()[0] = 0.5;
  sgd_step(params, s);
  const double v1 = s.velocity[0][0];
  w.grad()[0] = 0.25;
  sgd_step(params, s);
  EXPECT_DOUBLE_EQ(s.velocity[0][0], 0.9 * v1 + 0.25);
  EXPECT_DOUBLE_EQ(w.data()[0], 1.0 - 0.01 * v1 - 0.01 * (0.9 * v1 + 0.25));
}

TEST(Sgd, ZeroGradClears) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  w.grad()[1] = 3;
  std::vector<Tensor> params{w};
  zero_grad(params);
  EXPECT_EQ(w.grad()[1], 0.0);
}

TEST(BatchNorm, TrainingNormalisesAndUpdatesRunningStats) {
  BatchNormParams p = make_batch_norm(1);
  Tensor x = Tensor::from({1, 4}, {1, 2, 3, 6});
  Tensor y = batch_norm(x, p, true);
  // mean 3, biased variance (4 + 1 + 0 + 9) / 4 = 3.5
  const double sd = std::sqrt(3.5 + 1e-5);
  EXPECT_NEAR(y.data()[0], -2 / sd, 1e-12);
  EXPECT_NEAR(y.data()[3], 3 / sd, 1e-12);
  EXPECT_NEAR(p.running_mean.data()[0], 0.1 * 3, 1e-15);
  EXPECT_NEAR(p.running_var.data()[0], 0.9 * 1 + 0.1 * 3.5, 1e-15);
}

TEST(BatchNorm, EvalIsFixedAffineMap) {
  BatchNormParams p = make_batch_norm(2);
  p.running_mean.data()[0] = 1.0;
  p.running_var.data()[0] = 4.0;
  p.gamma.data()[0] = 2.0;
  p.beta.data()[0] = 0.5;
  Tensor a = Tensor::from({2, 2}, {3, 5, 0, 0});
  Tensor b = Tensor::from({2, 3}, {3, -9, 100, 1, 2, 3});
  Tensor ya = batch_norm(a, p, false);
  Tensor yb = batch_norm(b, p, false);
  // The same input value maps to the same output regardless of its batch.
  EXPECT_DOUBLE_EQ(ya.data()[0], yb.data()[0]);
  EXPECT_NEAR(ya.data()[0], 2.0 * (3 - 1) / std::sqrt(4 + 1e-5) + 0.5, 1e-12);
  EXPECT_EQ(p.running_mean.data()[0], 1.0);  // untouched in eval mode
}

TEST(MaskedCrossEntropy, HandComputed) {
  // Two classes at two positions: [[0, 0], [0, ln 3]].
  Tensor logits = Tensor::from({2, 2}, {0, 0, 0, std::log(3.0)}, true);
  std::vector<int> t{0, 1};
  MaskedLoss l = masked_softmax_ce(logits, t);
  EXPECT_EQ(l.included, 2);
  EXPECT_NEAR(l.loss.item(), (std::log(2.0) - std::log(0.75)) / 2, 1e-12);

  std::vector<int> masked{0, -1};
  Tensor logits2 = Tensor::from({2, 2}, {0, 0, 0, std::log(3.0)}, true);
  MaskedLoss l2 = masked_softmax_ce(logits2, masked);
  EXPECT_EQ(l2.included, 1);
  EXPECT_NEAR(l2.loss.item(), std::log(2.0), 1e-12);
  backward(l2.loss);
  // Excluded positions receive exactly zero gradient.
  EXPECT_EQ(logits2.grad()[1], 0.0);
  EXPECT_EQ(logits2.grad()[3], 0.0);
  EXPECT_NEAR(logits2.grad()[0], -0.5, 1e-12);
}

TEST(MaskedCrossEntropy, EmptyMaskRejected) {
  Tensor logits = Tensor::zeros({3, 2}, true);
  std::vector<int> none{-1, -1};
  EXPECT_THROW(masked_softmax_ce(logits, none), EmptyMask);
}

TEST(Layers, PoolRejectsOddExtent) {
  EXPECT_THROW(max_pool2(Tensor::zeros({1, 3, 4})), IndivisibleSpatialDims);
  EXPECT_THROW(avg_pool2(Tensor::zeros({1, 4, 4, 5})), IndivisibleSpatialDims);
}

TEST(Layers, ResBlockPreservesShapeAndBnOnlyIn2D) {
  Rng rng(1);
  ResBlockParams b2 = make_resblock(2, 3, 1, rng);
  ResBlockParams b3 = make_resblock(3, 3, 2, rng);
  EXPECT_TRUE(b2.bn1 && b2.bn2);
  EXPECT_FALSE(b3.bn1 || b3.bn2);
  EXPECT_EQ(resnet_block(Tensor::zeros({3, 4, 5}), b2, true).shape(), (Shape{3, 4, 5}));
  EXPECT_EQ(resnet_block(Tensor::zeros({3, 6, 5, 4}), b3, true).shape(), (Shape{3, 6, 5, 4}));
}

TEST(Layers, DeconvDoublesExtent) {
  Rng rng(2);
  ConvParams p = make_deconv(3, 4, 2, 4, 2, 1, rng);
  EXPECT_EQ(deconv(Tensor::zeros({4, 3, 2, 5}), p).shape(), (Shape{2, 6, 4, 10}));
}

TEST(Layers, DeconvIsAdjointOfConv) {
  Rng rng(3);
  // Same weights read as conv [O=2, C=3] and deconv [C_in=2, C_out=3].
  ConvParams c = make_conv(3, 3, 2, 4, 2, 1, 1, rng);
  c.bias = Tensor();
  Tensor x = Tensor::zeros({3, 4, 6, 4});
  for (auto& v : x.data()) v = rng.normal();
  Tensor y = conv(x, c);
  Tensor r = Tensor::zeros(y.shape());
  for (auto& v : r.data()) v = rng.normal();
  Tensor back = conv_transpose(r, c.kernel, Tensor(), c.options);
  ASSERT_EQ(back.shape(), x.shape());
  double lhs = 0, rhs = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) lhs += y.data()[i] * r.data()[i];
  for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * back.data()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Layers, CollectNamesInOrder) {
  Rng rng(4);
  ResBlockParams b = make_resblock(2, 2, 1, rng);
  std::vector<NamedTensor> out;
  collect("blk", b, out);
  ASSERT_EQ(out.size(), 12u);
  EXPECT_EQ(out[0].name, "blk.conv1.kernel");
  EXPECT_EQ(out[4].name, "blk.bn1.running_mean");
  EXPECT_FALSE(out[4].trainable);
}

class LayerGradients : public ::testing::TestWithParam<std::tuple<std::string, int>> {};

TEST_P(LayerGradients, PassFiniteDifferences) {
  const auto& [name, seed] = GetParam();
  SuiteResult r = run_suite(name, seed);
  EXPECT_TRUE(r.report.passed) << r.report.summary();
  EXPECT_EQ(r.tol, 1e-4);
  EXPECT_GT(r.report.elements.size(), 0u);
}

INSTANTIATE_TEST_SUITE_P(Suites, LayerGradients,
                         ::testing::Combine(::testing::ValuesIn(layer_suite_names()),
                                            ::testing::Range(1, 6)),
                         [](const auto& info) {
                           return std::get<0>(info.param) + "_seed" +
                                  std::to_string(std::get<1>(info.param));
                         });
