#pragma once

#include <span>
#include <vector>

#include "futureseg/checkpoint.hpp"
#include "futureseg/metrics.hpp"

namespace futureseg {

// Inference-ready model.
struct Model {
  ModelConfig config;
  ModelParams<float> params;

  static Model from_checkpoint(const Checkpoint& ckpt) { return {ckpt.config, ckpt.params()}; }
};

// Argmax of the predicted logits; ties go to the lowest class index.
SegMap predict_one_step(const Model& model, std::span<const SegMap> inputs);
SegMap predict_one_step(const Checkpoint& ckpt, std::span<const SegMap> inputs);

// Rolls the 4-frame window forward `horizon` times, feeding each argmax map
// back as the newest input.
std::vector<SegMap> predict_autoregressive(const Model& model, std::span<const SegMap> inputs,
                                           std::size_t horizon);
std::vector<SegMap> predict_autoregressive(const Checkpoint& ckpt, std::span<const SegMap> inputs,
                                           std::size_t horizon);

// Batched rollout: windows[i] holds 4 maps; returns horizon maps per window.
// Results equal per-window predict_autoregressive bit-exactly.
std::vector<std::vector<SegMap>> rollout_batch(const Model& model,
                                               std::span<const std::vector<SegMap>> windows,
                                               std::size_t horizon);

// Returns the newest input.
SegMap copy_last_baseline(std::span<const SegMap> inputs);

struct EvalReport {
  std::vector<MetricsReport> model;      // index h-1 for horizon h
  std::vector<MetricsReport> copy_last;
};

// Evaluates every sequence from its first four frames against frames
// 4..3+horizon. Sequences are split across up to `threads` workers; counts
// are merged in sequence order.
EvalReport evaluate_model(const Model& model, const Dataset& data, std::size_t horizon, std::size_t threads);

// Thread cap from FUTURESEG_THREADS, else the hardware concurrency.
std::size_t evaluation_threads();

}  // namespace futureseg
