#pragma once

// Reference implementations used only by tests. Each one is coded directly
// from the textual definition, without touching the tensor core.

#include <cmath>
#include <cstdint>
#include <vector>

#include "futureseg/data.hpp"

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar peephole LSTM: one channel, one pixel, 1x1 kernels.
struct ScalarLstm {
  double w_fi, w_ff, w_fc, w_fo;
  double w_hi, w_hf, w_hc, w_ho;
  double w_ci, w_cf, w_co;
  double b_i, b_f, b_c, b_o;

  // Updates (h, c) in place from input f.
  void step(double f, double& h, double& c) const {
    const double i = sigmoid(w_fi * f + w_hi * h + w_ci * c + b_i);
    const double forget = sigmoid(w_ff * f + w_hf * h + w_cf * c + b_f);
    const double cand = std::tanh(w_fc * f + w_hc * h + b_c);
    const double c_new = forget * c + i * cand;
    const double o = sigmoid(w_fo * f + w_ho * h + w_co * c_new + b_o);
    h = o * std::tanh(c_new);
    c = c_new;
  }
};

// Per-class IoU from an explicit K x K confusion matrix.
struct ConfusionIou {
  std::vector<double> iou;
  std::vector<bool> present;
  double miou = 0.0;
};

inline ConfusionIou confusion_iou(const std::vector<futureseg::SegMap>& preds,
                                  const std::vector<futureseg::SegMap>& gts, std::size_t k) {
  std::vector<std::vector<std::uint64_t>> conf(k, std::vector<std::uint64_t>(k, 0));
  for (std::size_t f = 0; f < preds.size(); ++f) {
    for (std::size_t p = 0; p < preds[f].labels.size(); ++p) ++conf[gts[f].labels[p]][preds[f].labels[p]];
  }
  ConfusionIou r;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += conf[c][j];
      col += conf[j][c];
    }
    const std::uint64_t uni = row + col - conf[c][c];
    r.present.push_back(uni > 0);
    r.iou.push_back(uni > 0 ? static_cast<double>(conf[c][c]) / static_cast<double>(uni) : std::nan(""));
    if (uni > 0) {
      total += r.iou.back();
      ++n;
    }
  }
  r.miou = n ? total / static_cast<double>(n) : 0.0;
  return r;
}

// Re-simulates a scene from its initial shape states: frame 0 shows the
// initial positions; between frames each axis moves by its velocity, and a
// move that would leave the frame reverses that velocity first.
inline std::vector<futureseg::SegMap> simulate(std::vector<futureseg::ShapeState> shapes, int height, int width,
                                               std::size_t frames) {
  std::vector<futureseg::SegMap> out;
  for (std::size_t t = 0; t < frames; ++t) {
    if (t > 0) {
      for (auto& s : shapes) {
        if (s.x + s.vx < 0 || s.x + s.vx + s.w > width) s.vx = -s.vx;
        if (s.y + s.vy < 0 || s.y + s.vy + s.h > height) s.vy = -s.vy;
        s.x = std::min(std::max(s.x + s.vx, 0), width - s.w);
        s.y = std::min(std::max(s.y + s.vy, 0), height - s.h);
      }
    }
    futureseg::SegMap m(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
    for (const auto& s : shapes) {
      // Disc membership: pixel centre inside the circle inscribed in the box.
      const double cx = s.x + s.w / 2.0, cy = s.y + s.h / 2.0, r = s.w / 2.0;
      for (int y = s.y; y < s.y + s.h; ++y) {
        for (int x = s.x; x < s.x + s.w; ++x) {
          if (s.kind == futureseg::ShapeKind::disc) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy > r * r) continue;
          }
          m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s.label;
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace oracle
