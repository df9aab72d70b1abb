#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vvnet/scene.hpp"

namespace vvnet {

struct Counts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

/// Scene completion: occupancy on occluded voxels (mask 1 or 3).
struct ScMetrics {
  Counts counts;
  double precision = 0.0;  // 0 when nothing is predicted occupied
  double recall = 0.0;
  double iou = 0.0;
};

/// Semantic scene completion on occluded and visible-surface voxels.
/// iou[c-1] is empty for a class absent from both prediction and truth.
struct SscMetrics {
  std::vector<Counts> counts;
  std::vector<std::optional<double>> iou;
  double average = 0.0;
};

struct EvalReport {
  ScMetrics sc;
  SscMetrics ssc;
};

// Predictions are class ids in VoxelGrid::linear order.
ScMetrics eval_sc(std::span<const std::uint8_t> pred, const LabelVolume& gt);
SscMetrics eval_ssc(std::span<const std::uint8_t> pred, const LabelVolume& gt, int num_classes);
EvalReport evaluate(std::span<const std::uint8_t> pred, const LabelVolume& gt, int num_classes);

ScMetrics sc_from_counts(const Counts& c);
SscMetrics ssc_from_counts(std::vector<Counts> counts);

/// Pools TP/FP/FN over scenes before forming ratios.
EvalReport aggregate(std::span<const EvalReport> reports);

/// Column names in table order; the 11-class set uses the usual indoor names.
std::vector<std::string> class_names(int num_classes);

/// Tab-separated two-line table: header, then values.
std::string format_report(const EvalReport& r);

}  // namespace vvnet
