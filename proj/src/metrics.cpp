#include "vvnet/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "vvnet/error.hpp"

namespace vvnet {

namespace {

void check_shapes(std::span<const std::uint8_t> pred, const LabelVolume& gt) {
  if (static_cast<std::int64_t>(pred.size()) != gt.count() ||
      gt.label.size() != gt.mask.size()) {
    throw ShapeMismatch("prediction of " + std::to_string(pred.size()) + " voxels vs truth of " +
                        std::to_string(gt.count()));
  }
}

double ratio(std::int64_t num, std::int64_t den) { return den > 0 ? double(num) / double(den) : 0.0; }

}  // namespace

ScMetrics sc_from_counts(const Counts& c) {
  ScMetrics m;
  m.counts = c;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  return m;
}

SscMetrics ssc_from_counts(std::vector<Counts> counts) {
  SscMetrics m;
  m.counts = std::move(counts);
  double total = 0.0;
  int present = 0;
  for (const auto& c : m.counts) {
    auto den = c.tp + c.fp + c.fn;
    if (den == 0) {
      m.iou.emplace_back();
      continue;
    }
    m.iou.emplace_back(double(c.tp) / double(den));
    total += *m.iou.back();
    ++present;
  }
  m.average = present > 0 ? total / present : 0.0;
  return m;
}

ScMetrics eval_sc(std::span<const std::uint8_t> pred, const LabelVolume& gt) {
  check_shapes(pred, gt);
  Counts c;
  std::int64_t domain = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto m = static_cast<VoxelMask>(gt.mask[i]);
    if (m != VoxelMask::kOccludedEmpty && m != VoxelMask::kOccludedOccupied) continue;
    ++domain;
    bool p = pred[i] != 0, t = gt.label[i] != 0;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  if (domain == 0) throw EmptyEvalDomain("no occluded voxels to evaluate");
  return sc_from_counts(c);
}

SscMetrics eval_ssc(std::span<const std::uint8_t> pred, const LabelVolume& gt, int num_classes) {
  check_shapes(pred, gt);
  std::vector<Counts> counts(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto m = static_cast<VoxelMask>(gt.mask[i]);
    if (m != VoxelMask::kOccludedEmpty && m != VoxelMask::kOccludedOccupied &&
        m != VoxelMask::kVisibleSurface) {
      continue;
    }
    int p = pred[i], t = gt.label[i];
    if (p == t) {
      if (p >= 1 && p <= num_classes) ++counts[p - 1].tp;
      continue;
    }
    if (p >= 1 && p <= num_classes) ++counts[p - 1].fp;
    if (t >= 1 && t <= num_classes) ++counts[t - 1].fn;
  }
  return ssc_from_counts(std::move(counts));
}

EvalReport evaluate(std::span<const std::uint8_t> pred, const LabelVolume& gt, int num_classes) {
  return {eval_sc(pred, gt), eval_ssc(pred, gt, num_classes)};
}

EvalReport aggregate(std::span<const EvalReport> reports) {
  if (reports.empty()) throw EmptyEvalDomain("no reports to aggregate");
  Counts sc;
  std::vector<Counts> ssc(reports.front().ssc.counts.size());
  for (const auto& r : reports) {
    sc += r.sc.counts;
    if (r.ssc.counts.size() != ssc.size()) throw ShapeMismatch("reports disagree on class count");
    for (std::size_t c = 0; c < ssc.size(); ++c) ssc[c] += r.ssc.counts[c];
  }
  return {sc_from_counts(sc), ssc_from_counts(std::move(ssc))};
}

std::vector<std::string> class_names(int num_classes) {
  if (num_classes == 11) {
    return {"ceil.", "floor", "wall", "win.", "chair", "bed",
            "sofa",  "table", "tvs",  "furn.", "objs."};
  }
  std::vector<std::string> names;
  for (int c = 1; c <= num_classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << "prec\trecall\tIoU\t|";
  for (const auto& n : class_names(static_cast<int>(r.ssc.iou.size()))) os << '\t' << n;
  os << "\tavg\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  os << num(r.sc.precision) << '\t' << num(r.sc.recall) << '\t' << num(r.sc.iou) << "\t|";
  for (const auto& iou : r.ssc.iou) os << '\t' << (iou ? num(*iou) : std::string("-"));
  os << '\t' << num(r.ssc.average) << '\n';
  return os.str();
}

}  // namespace vvnet
