#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "futureseg/tensor.hpp"

namespace futureseg {

// One frame of class indices, row-major.
struct SegMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  SegMap() = default;
  SegMap(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }

  friend bool operator==(const SegMap&, const SegMap&) = default;
};

struct SegSequence {
  std::vector<SegMap> frames;

  friend bool operator==(const SegSequence&, const SegSequence&) = default;
};

// A set of equally sized sequences sharing one class count.
struct Dataset {
  std::uint32_t num_classes = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<SegSequence> sequences;

  // Throws ShapeError on size mismatches, ClassRangeError on labels >= K.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class ShapeKind : std::uint8_t { rectangle, disc };

struct GenConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t num_classes = 4;
  std::size_t shapes_per_sequence = 3;
  std::size_t min_size = 10;
  std::size_t max_size = 20;
  int max_speed = 3;  // velocity components drawn from [-max_speed, max_speed]
  bool rectangles = true;
  bool discs = true;
  std::size_t sequence_count = 500;
  std::size_t frames = 8;
  std::uint64_t seed = 7;

  void validate() const;
};

// Initial state of one shape. (x, y) is the top-left corner of its bounding
// box; a disc's box is square with side = diameter.
struct ShapeState {
  ShapeKind kind = ShapeKind::rectangle;
  std::uint8_t label = 1;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  int vx = 0;
  int vy = 0;
};

// Shapes of sequence `index`, drawn from a sub-seed of (cfg.seed, index).
std::vector<ShapeState> sample_scene(const GenConfig& cfg, std::size_t index);

// Renders cfg.frames frames. Each frame advances every shape by its velocity;
// a velocity component flips sign when the move would leave the frame.
// Later shapes are drawn over earlier ones.
SegSequence render_scene(const GenConfig& cfg, std::vector<ShapeState> shapes);

Dataset generate_dataset(const GenConfig& cfg);

template <typename T>
Tensor<T> one_hot_encode(const SegMap& m, std::size_t num_classes);

// Stacks maps into an [N,K,H,W] one-hot batch.
template <typename T>
Tensor<T> one_hot_batch(std::span<const SegMap* const> maps, std::size_t num_classes);

// Per-pixel argmax over channels of image n; ties go to the lowest index.
template <typename T>
SegMap argmax_map(const Tensor<T>& scores, std::size_t n);

// Crops a (crop_h x crop_w) window and applies a number of quarter turns
// (counter-clockwise), both drawn from `seed` and shared by all frames.
SegSequence augment(const SegSequence& seq, std::uint64_t seed, std::size_t crop_h,
                    std::size_t crop_w, std::span<const int> quarter_turns);

// Deterministic parts of augment(), exposed for direct use.
SegMap crop(const SegMap& m, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
SegMap rotate_quarter_turns(const SegMap& m, int turns);

}  // namespace futureseg
