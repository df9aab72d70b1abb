#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vvnet/error.hpp"
#include "vvnet/metrics.hpp"

using namespace vvnet;

TEST(Metrics, FixtureExactValues) {
  auto f = oracle::metric_fixture();
  EvalReport r = evaluate(f.pred, f.gt, 2);
  EXPECT_EQ(r.sc.counts, (Counts{2, 1, 0}));
  EXPECT_DOUBLE_EQ(r.sc.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.sc.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.sc.iou, 2.0 / 3.0);
  ASSERT_EQ(r.ssc.iou.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.ssc.iou[0], 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(*r.ssc.iou[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.ssc.average, 7.0 / 24.0);
}

TEST(Metrics, AbsentClassIsSkippedInAverage) {
  auto f = oracle::metric_fixture();
  SscMetrics m = eval_ssc(f.pred, f.gt, 3);
  EXPECT_FALSE(m.iou[2].has_value());
  EXPECT_DOUBLE_EQ(m.average, 7.0 / 24.0);
  EXPECT_NE(format_report({eval_sc(f.pred, f.gt), m}).find("\t-\t"), std::string::npos);
}

TEST(Metrics, ExcludedVoxelsDoNotCount) {
  auto f = oracle::metric_fixture();
  auto base = evaluate(f.pred, f.gt, 2);
  // Voxels 6 (mask 0) and 7 (mask 4) are outside both domains.
  f.pred[6] = 2;
  f.pred[7] = 0;
  auto changed = evaluate(f.pred, f.gt, 2);
  EXPECT_EQ(changed.sc.counts, base.sc.counts);
  EXPECT_EQ(changed.ssc.counts, base.ssc.counts);
}

TEST(Metrics, PerfectPrediction) {
  auto f = oracle::metric_fixture();
  auto r = evaluate(f.gt.label, f.gt, 2);
  EXPECT_DOUBLE_EQ(r.sc.iou, 1.0);
  EXPECT_DOUBLE_EQ(r.ssc.average, 1.0);
}

TEST(Metrics, AggregationPoolsCountsAndDoublingIsInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    LabelVolume gt({4, 3, 2});
    std::vector<std::uint8_t> pred(24);
    for (int i = 0; i < 24; ++i) {
      gt.mask[i] = std::uint8_t(rng() % 6);
      gt.label[i] = std::uint8_t(rng() % 4);
      pred[i] = std::uint8_t(rng() % 4);
    }
    gt.mask[0] = 1;
    auto one = evaluate(pred, gt, 3);
    std::vector<EvalReport> two{one, one};
    auto agg = aggregate(two);
    EXPECT_DOUBLE_EQ(agg.sc.iou, one.sc.iou);
    EXPECT_DOUBLE_EQ(agg.ssc.average, one.ssc.average);
    EXPECT_EQ(agg.sc.counts.tp, 2 * one.sc.counts.tp);
  }
}

TEST(Metrics, MicroNotMacroAggregation) {
  LabelVolume a({1, 1, 2}), b({1, 1, 2});
  a.mask = {1, 1};
  a.label = {1, 1};
  b.mask = {1, 1};
  b.label = {1, 0};
  std::vector<std::uint8_t> pa{1, 1}, pb{0, 1};
  std::vector<EvalReport> rs{evaluate(pa, a, 1), evaluate(pb, b, 1)};
  // a: tp 2. b: fp 1, fn 1. Pooled IoU 2/4, not the mean of 1 and 0.
  EXPECT_DOUBLE_EQ(aggregate(rs).sc.iou, 0.5);
}

TEST(Metrics, Errors) {
  LabelVolume gt({1, 1, 2});
  gt.mask = {2, 0};
  std::vector<std::uint8_t> pred{0, 0};
  EXPECT_THROW(eval_sc(pred, gt), EmptyEvalDomain);
  std::vector<std::uint8_t> short_pred{0};
  EXPECT_THROW(eval_ssc(short_pred, gt, 2), ShapeMismatch);
  EXPECT_THROW(aggregate({}), EmptyEvalDomain);
}

TEST(Metrics, ReportFormat) {
  auto f = oracle::metric_fixture();
  std::string s = format_report(evaluate(f.pred, f.gt, 2));
  EXPECT_EQ(s,
            "prec\trecall\tIoU\t|\tclass1\tclass2\tavg\n"
            "0.6667\t1.0000\t0.6667\t|\t0.2500\t0.3333\t0.2917\n");
  EXPECT_EQ(class_names(11).front(), "ceil.");
  EXPECT_EQ(class_names(11).size(), 11u);
}
