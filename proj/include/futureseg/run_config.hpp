#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "futureseg/data.hpp"
#include "futureseg/train.hpp"

namespace futureseg {

// Every setting a CLI run can take. Files are flat `key = value` lines with
// `#` comments; unknown keys are rejected.
struct RunConfig {
  // data generation
  std::size_t train_sequences = 500;
  std::size_t val_sequences = 100;
  std::size_t frames = 8;
  std::size_t shapes = 3;
  std::size_t min_size = 10;
  std::size_t max_size = 20;
  int max_speed = 3;
  std::string shape_kinds = "rectangle,disc";

  // model
  std::size_t num_classes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
  LstmMode mode = LstmMode::uni;
  bool share_directions = false;

  // training / evaluation
  std::uint64_t seed = 7;
  std::size_t epochs = 6;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment = false;
  std::size_t horizon = 3;

  // paths
  std::string data;
  std::string checkpoint;
  std::string predictions;

  // Sets one key; throws ConfigError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  // Applies every `key = value` line of `text`.
  void apply_text(std::string_view text, std::string_view origin = "<text>");
  void apply_file(const std::filesystem::path& path);

  // Canonical `key = value` listing of every setting.
  std::string to_text() const;

  GenConfig train_generator() const;
  GenConfig val_generator() const;
  ModelConfig model() const;
  TrainConfig training() const;
};

}  // namespace futureseg
