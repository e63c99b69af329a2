#include "futureseg/train.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "futureseg/error.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/predict.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

void TrainConfig::validate() const {
  model.validate();
  adam.validate();
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (horizon < 1) throw ConfigError("train: horizon must be >= 1");
}

namespace {

constexpr std::size_t kWindow = kSequenceLength + 1;

struct Sample {
  std::size_t sequence;
  std::size_t start;
};

void check_dataset(const ModelConfig& cfg, const Dataset& ds, const char* which) {
  if (ds.sequences.empty()) return;
  if (ds.num_classes != cfg.num_classes || ds.height != cfg.height || ds.width != cfg.width) {
    throw ShapeError(std::string("train: ") + which + " data is K=" + std::to_string(ds.num_classes) + " " +
                     std::to_string(ds.height) + "x" + std::to_string(ds.width) + ", model expects K=" +
                     std::to_string(cfg.num_classes) + " " + std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width));
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const EpochLogger& log) {
  cfg.validate();
  if (train_data.sequences.empty()) throw Error("train: empty training dataset");
  check_dataset(cfg.model, train_data, "training");
  check_dataset(cfg.model, val_data, "validation");

  std::vector<Sample> samples;
  for (std::size_t s = 0; s < train_data.sequences.size(); ++s) {
    const std::size_t t = train_data.sequences[s].frames.size();
    for (std::size_t i = 0; i + kWindow <= t; ++i) samples.push_back({s, i});
  }
  if (samples.empty()) throw Error("train: no training sequence has the 5 frames one window needs");
  const bool has_val = !val_data.sequences.empty();

  std::vector<int> turns{0, 2};
  if (cfg.model.height == cfg.model.width) turns = {0, 1, 2, 3};

  ModelParams<float> params = init_params<float>(cfg.model, cfg.seed);
  Adam<float> opt(params.named(), cfg.adam);

  TrainResult res;
  res.initial_loss = std::numeric_limits<double>::quiet_NaN();
  res.best = Checkpoint::capture(cfg.model, params, cfg.seed, 0);
  double best_score = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<Sample> order = samples;
    Rng rng(mix_seed(cfg.seed, 0x10000 + epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::vector<SegSequence> windows;
      for (std::size_t i = b; i < e; ++i) {
        const auto& fr = train_data.sequences[order[i].sequence].frames;
        SegSequence w;
        w.frames.assign(fr.begin() + static_cast<std::ptrdiff_t>(order[i].start),
                        fr.begin() + static_cast<std::ptrdiff_t>(order[i].start + kWindow));
        if (cfg.augment) {
          w = augment(w, mix_seed(cfg.seed, (epoch << 32) + i), cfg.model.height, cfg.model.width, turns);
        }
        windows.push_back(std::move(w));
      }
      std::vector<Tensor<float>> frames;
      for (std::size_t f = 0; f < kSequenceLength; ++f) {
        std::vector<const SegMap*> maps;
        for (const auto& w : windows) maps.push_back(&w.frames[f]);
        frames.push_back(one_hot_batch<float>(maps, cfg.model.num_classes));
      }
      std::vector<std::uint8_t> targets;
      for (const auto& w : windows) {
        const auto& lab = w.frames[kSequenceLength].labels;
        targets.insert(targets.end(), lab.begin(), lab.end());
      }

      double loss_value = 0.0;
      try {
        const Var<float> loss =
            softmax_cross_entropy_mean(forward_batch<float>(params, cfg.model, frames), targets);
        loss_value = loss.value().ptr()[0];
        opt.step(backward(loss));
      } catch (const NumericError& err) {
        throw NumericError("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(batches) +
                           ": " + err.what());
      }
      if (batches == 0 && epoch == 1) res.initial_loss = loss_value;
      loss_sum += loss_value;
      ++batches;
    }
    const double mean_loss = loss_sum / static_cast<double>(batches);
    res.loss_curve.push_back(mean_loss);

    MetricsReport val;
    double score = -mean_loss;
    if (has_val) {
      val = evaluate_model(Model{cfg.model, params}, val_data, 1, evaluation_threads()).model.front();
      score = val.miou;
    }
    res.val_miou.push_back(has_val ? val.miou : std::numeric_limits<double>::quiet_NaN());
    if (score > best_score) {
      best_score = score;
      res.best = Checkpoint::capture(cfg.model, params, cfg.seed, static_cast<std::uint32_t>(epoch));
      res.report = val;
      res.best_epoch = epoch;
    }
    if (log) {
      nlohmann::json j;
      j["epoch"] = epoch;
      j["loss"] = mean_loss;
      if (has_val) {
        j["miou"] = val.miou;
        nlohmann::json ious = nlohmann::json::array();
        for (std::size_t c = 0; c < val.class_iou.size(); ++c) {
          if (val.present[c]) {
            ious.push_back(val.class_iou[c]);
          } else {
            ious.push_back(nullptr);
          }
        }
        j["class_iou"] = ious;
      }
      log(j.dump());
    }
  }
  res.report.loss_curve = res.loss_curve;
  return res;
}

}  // namespace futureseg
