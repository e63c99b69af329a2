#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "futureseg/checkpoint.hpp"
#include "futureseg/metrics.hpp"
#include "futureseg/optimizer.hpp"

namespace futureseg {

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 6;
  std::size_t batch_size = 8;
  AdamConfig adam;
  std::uint64_t seed = 7;
  // Random quarter-turn rotation of each training window (same turn for all
  // five frames). Frames must be square for turns other than 0 and 2.
  bool augment = false;
  std::size_t horizon = 3;

  void validate() const;
};

struct TrainResult {
  Checkpoint best;             // highest validation one-step mIoU
  MetricsReport report;        // validation metrics of `best`, loss curve attached
  double initial_loss = 0.0;   // loss of the first batch before any update; NaN if no step ran
  std::vector<double> loss_curve;  // mean training loss per epoch
  std::vector<double> val_miou;    // validation one-step mIoU per epoch
  std::size_t best_epoch = 0;
};

// Receives one JSON object per epoch.
using EpochLogger = std::function<void(const std::string& json_line)>;

// Windows (i..i+3 -> i+4) of every sequence, shuffled per epoch with a seeded
// generator, grouped into batches of batch_size with one Adam step each.
TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const EpochLogger& log = {});

}  // namespace futureseg
