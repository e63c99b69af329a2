#include "futureseg/metrics.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "futureseg/error.hpp"

namespace futureseg {

IouAccumulator::IouAccumulator(std::size_t num_classes)
    : intersection_(num_classes, 0), predicted_(num_classes, 0), actual_(num_classes, 0) {}

void IouAccumulator::add(const SegMap& pred, const SegMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("mIoU: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     " vs ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  const std::size_t k = num_classes();
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const std::uint8_t p = pred.labels[i];
    const std::uint8_t g = gt.labels[i];
    if (p >= k || g >= k) {
      throw ClassRangeError("mIoU: class index " + std::to_string(std::max(p, g)) + " >= K=" + std::to_string(k));
    }
    ++predicted_[p];
    ++actual_[g];
    if (p == g) ++intersection_[p];
  }
}

void IouAccumulator::merge(const IouAccumulator& other) {
  if (other.num_classes() != num_classes()) throw ShapeError("mIoU: merging different class counts");
  for (std::size_t c = 0; c < num_classes(); ++c) {
    intersection_[c] += other.intersection_[c];
    predicted_[c] += other.predicted_[c];
    actual_[c] += other.actual_[c];
  }
}

MetricsReport IouAccumulator::report() const {
  MetricsReport r;
  r.num_classes = num_classes();
  r.class_iou.assign(r.num_classes, std::numeric_limits<double>::quiet_NaN());
  r.present.assign(r.num_classes, false);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    const std::uint64_t uni = predicted_[c] + actual_[c] - intersection_[c];
    if (uni == 0) continue;
    r.present[c] = true;
    r.class_iou[c] = static_cast<double>(intersection_[c]) / static_cast<double>(uni);
    total += r.class_iou[c];
    ++counted;
  }
  r.miou = counted ? total / static_cast<double>(counted) : 0.0;
  return r;
}

MetricsReport evaluate_miou(std::span<const SegMap> preds, std::span<const SegMap> gts, std::size_t num_classes) {
  if (preds.empty()) throw Error("mIoU: empty input set");
  if (preds.size() != gts.size()) {
    throw ShapeError("mIoU: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(gts.size()) + " ground-truth maps");
  }
  IouAccumulator acc(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], gts[i]);
  return acc.report();
}

std::string to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["miou"] = r.miou;
  nlohmann::json ious = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_iou.size(); ++c) {
    if (r.present[c]) {
      ious.push_back(r.class_iou[c]);
    } else {
      ious.push_back(nullptr);
    }
  }
  j["class_iou"] = ious;
  if (!r.horizon_miou.empty()) j["horizon_miou"] = r.horizon_miou;
  if (!r.loss_curve.empty()) j["loss_curve"] = r.loss_curve;
  return j.dump();
}

}  // namespace futureseg
