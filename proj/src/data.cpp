#include "futureseg/data.hpp"

#include <algorithm>
#include <string>

#include "futureseg/error.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

void Dataset::validate() const {
  if (num_classes < 1 || num_classes > 256) {
    throw ClassRangeError("dataset: class count " + std::to_string(num_classes) + " outside [1,256]");
  }
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (const SegMap& m : sequences[s].frames) {
      if (m.height != height || m.width != width || m.labels.size() != m.height * m.width) {
        throw ShapeError("dataset: sequence " + std::to_string(s) + " has a " +
                         std::to_string(m.height) + "x" + std::to_string(m.width) + " frame, expected " +
                         std::to_string(height) + "x" + std::to_string(width));
      }
      for (std::uint8_t v : m.labels) {
        if (v >= num_classes) {
          throw ClassRangeError("dataset: class index " + std::to_string(v) + " >= K=" +
                                std::to_string(num_classes));
        }
      }
    }
  }
}

void GenConfig::validate() const {
  if (num_classes < 2 || num_classes > 256) throw ConfigError("generator: K must be in [2,256]");
  if (height == 0 || width == 0) throw ConfigError("generator: empty frame");
  if (min_size == 0 || min_size > max_size) throw ConfigError("generator: need 1 <= min_size <= max_size");
  if (max_size > std::min(height, width)) {
    throw ShapeError("generator: shape size " + std::to_string(max_size) + " larger than the " +
                     std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
  if (max_speed < 0) throw ConfigError("generator: max_speed must be >= 0");
  if (!rectangles && !discs) throw ConfigError("generator: no shape kind enabled");
  if (frames == 0) throw ConfigError("generator: frames must be >= 1");
}

std::vector<ShapeState> sample_scene(const GenConfig& cfg, std::size_t index) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, index));
  std::vector<ShapeState> shapes(cfg.shapes_per_sequence);
  for (ShapeState& s : shapes) {
    if (cfg.rectangles && cfg.discs) {
      s.kind = rng.uniform_int(0, 1) == 0 ? ShapeKind::rectangle : ShapeKind::disc;
    } else {
      s.kind = cfg.rectangles ? ShapeKind::rectangle : ShapeKind::disc;
    }
    s.label = static_cast<std::uint8_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.num_classes) - 1));
    const auto lo = static_cast<std::int64_t>(cfg.min_size);
    const auto hi = static_cast<std::int64_t>(cfg.max_size);
    s.w = static_cast<int>(rng.uniform_int(lo, hi));
    s.h = s.kind == ShapeKind::disc ? s.w : static_cast<int>(rng.uniform_int(lo, hi));
    s.x = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.width) - s.w));
    s.y = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.height) - s.h));
    do {
      s.vx = static_cast<int>(rng.uniform_int(-cfg.max_speed, cfg.max_speed));
      s.vy = static_cast<int>(rng.uniform_int(-cfg.max_speed, cfg.max_speed));
    } while (cfg.max_speed > 0 && s.vx == 0 && s.vy == 0);
  }
  return shapes;
}

namespace {

void advance_axis(int& pos, int& vel, int extent, int limit) {
  int next = pos + vel;
  if (next < 0 || next + extent > limit) {
    vel = -vel;
    next = pos + vel;
  }
  pos = std::clamp(next, 0, limit - extent);
}

void draw(const ShapeState& s, SegMap& m) {
  for (int dy = 0; dy < s.h; ++dy) {
    for (int dx = 0; dx < s.w; ++dx) {
      if (s.kind == ShapeKind::disc) {
        const int a = 2 * dx + 1 - s.w;
        const int b = 2 * dy + 1 - s.h;
        if (a * a + b * b > s.w * s.w) continue;
      }
      m.at(static_cast<std::size_t>(s.y + dy), static_cast<std::size_t>(s.x + dx)) = s.label;
    }
  }
}

}  // namespace

SegSequence render_scene(const GenConfig& cfg, std::vector<ShapeState> shapes) {
  const int width = static_cast<int>(cfg.width);
  const int height = static_cast<int>(cfg.height);
  SegSequence seq;
  seq.frames.reserve(cfg.frames);
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    if (f > 0) {
      for (ShapeState& s : shapes) {
        advance_axis(s.x, s.vx, s.w, width);
        advance_axis(s.y, s.vy, s.h, height);
      }
    }
    SegMap m(cfg.height, cfg.width);
    for (const ShapeState& s : shapes) draw(s, m);
    seq.frames.push_back(std::move(m));
  }
  return seq;
}

Dataset generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.num_classes = static_cast<std::uint32_t>(cfg.num_classes);
  ds.height = static_cast<std::uint32_t>(cfg.height);
  ds.width = static_cast<std::uint32_t>(cfg.width);
  ds.sequences.reserve(cfg.sequence_count);
  for (std::size_t i = 0; i < cfg.sequence_count; ++i) {
    ds.sequences.push_back(render_scene(cfg, sample_scene(cfg, i)));
  }
  return ds;
}

template <typename T>
Tensor<T> one_hot_encode(const SegMap& m, std::size_t num_classes) {
  const SegMap* maps[] = {&m};
  return one_hot_batch<T>(maps, num_classes);
}

template <typename T>
Tensor<T> one_hot_batch(std::span<const SegMap* const> maps, std::size_t num_classes) {
  if (maps.empty()) throw ShapeError("one_hot: empty batch");
  const std::size_t h = maps[0]->height;
  const std::size_t w = maps[0]->width;
  Tensor<T> out(Dims{maps.size(), num_classes, h, w});
  const std::size_t plane = h * w;
  for (std::size_t n = 0; n < maps.size(); ++n) {
    const SegMap& m = *maps[n];
    if (m.height != h || m.width != w) throw ShapeError("one_hot: maps differ in size");
    T* base = out.ptr() + n * num_classes * plane;
    for (std::size_t q = 0; q < plane; ++q) {
      const std::uint8_t c = m.labels[q];
      if (c >= num_classes) {
        throw ClassRangeError("one_hot: class index " + std::to_string(c) + " >= K=" +
                              std::to_string(num_classes));
      }
      base[c * plane + q] = T(1);
    }
  }
  return out;
}

template <typename T>
SegMap argmax_map(const Tensor<T>& scores, std::size_t n) {
  const Dims d = scores.dims();
  if (n >= d.n || d.c == 0) throw ShapeError("argmax: batch index out of range");
  SegMap m(d.h, d.w);
  const std::size_t plane = d.h * d.w;
  const T* base = scores.ptr() + n * d.c * plane;
  for (std::size_t q = 0; q < plane; ++q) {
    std::size_t best = 0;
    T best_v = base[q];
    for (std::size_t k = 1; k < d.c; ++k) {
      const T v = base[k * plane + q];
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    m.labels[q] = static_cast<std::uint8_t>(best);
  }
  return m;
}

SegMap crop(const SegMap& m, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > m.height || left + w > m.width) {
    throw ShapeError("crop: " + std::to_string(h) + "x" + std::to_string(w) + " window at (" +
                     std::to_string(top) + "," + std::to_string(left) + ") exceeds " +
                     std::to_string(m.height) + "x" + std::to_string(m.width) + " frame");
  }
  SegMap out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(m.labels.begin() + static_cast<std::ptrdiff_t>((top + y) * m.width + left), w,
                out.labels.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  return out;
}

SegMap rotate_quarter_turns(const SegMap& m, int turns) {
  turns = ((turns % 4) + 4) % 4;
  SegMap cur = m;
  for (int t = 0; t < turns; ++t) {
    SegMap next(cur.width, cur.height);
    for (std::size_t y = 0; y < next.height; ++y) {
      for (std::size_t x = 0; x < next.width; ++x) next.at(y, x) = cur.at(x, cur.width - 1 - y);
    }
    cur = std::move(next);
  }
  return cur;
}

SegSequence augment(const SegSequence& seq, std::uint64_t seed, std::size_t crop_h,
                    std::size_t crop_w, std::span<const int> quarter_turns) {
  if (seq.frames.empty()) return seq;
  const std::size_t h = seq.frames[0].height;
  const std::size_t w = seq.frames[0].width;
  if (crop_h > h || crop_w > w) {
    throw ShapeError("augment: crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                     " larger than frame " + std::to_string(h) + "x" + std::to_string(w));
  }
  Rng rng(seed);
  const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h - crop_h)));
  const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w - crop_w)));
  int turns = 0;
  if (!quarter_turns.empty()) {
    turns = quarter_turns[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(quarter_turns.size()) - 1))];
  }
  SegSequence out;
  out.frames.reserve(seq.frames.size());
  for (const SegMap& m : seq.frames) {
    out.frames.push_back(rotate_quarter_turns(crop(m, top, left, crop_h, crop_w), turns));
  }
  return out;
}

template Tensor<float> one_hot_encode<float>(const SegMap&, std::size_t);
template Tensor<double> one_hot_encode<double>(const SegMap&, std::size_t);
template Tensor<float> one_hot_batch<float>(std::span<const SegMap* const>, std::size_t);
template Tensor<double> one_hot_batch<double>(std::span<const SegMap* const>, std::size_t);
template SegMap argmax_map(const Tensor<float>&, std::size_t);
template SegMap argmax_map(const Tensor<double>&, std::size_t);

}  // namespace futureseg
