#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "futureseg/data.hpp"

namespace futureseg {

struct MetricsReport {
  std::size_t num_classes = 0;
  // IoU per class; NaN where the class appears in neither prediction nor
  // ground truth (present[c] == false).
  std::vector<double> class_iou;
  std::vector<bool> present;
  // Mean over present classes.
  double miou = 0.0;
  std::vector<double> horizon_miou;
  std::vector<double> loss_curve;
};

// Dataset-level intersection/union counts, accumulated frame by frame.
class IouAccumulator {
 public:
  explicit IouAccumulator(std::size_t num_classes);

  void add(const SegMap& pred, const SegMap& gt);
  void merge(const IouAccumulator& other);
  MetricsReport report() const;
  std::size_t num_classes() const { return intersection_.size(); }

 private:
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> predicted_;
  std::vector<std::uint64_t> actual_;
};

// Throws Error on empty input, ShapeError on size mismatch, ClassRangeError
// on indices >= K.
MetricsReport evaluate_miou(std::span<const SegMap> preds, std::span<const SegMap> gts,
                            std::size_t num_classes);

// One JSON object (no trailing newline).
std::string to_json(const MetricsReport& r);

}  // namespace futureseg
