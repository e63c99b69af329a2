#include "futureseg/predict.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

#include "futureseg/error.hpp"

namespace futureseg {

namespace {

constexpr std::size_t kEvalBatch = 16;

void check_window(const ModelConfig& cfg, std::span<const SegMap> inputs) {
  if (inputs.size() != kSequenceLength) {
    throw ShapeError("predict: expected 4 input maps, got " + std::to_string(inputs.size()));
  }
  for (const SegMap& m : inputs) {
    if (m.height != cfg.height || m.width != cfg.width) {
      throw ShapeError("predict: input " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                       " does not match the checkpoint's " + std::to_string(cfg.height) + "x" +
                       std::to_string(cfg.width));
    }
  }
}

}  // namespace

std::vector<std::vector<SegMap>> rollout_batch(const Model& model, std::span<const std::vector<SegMap>> windows,
                                               std::size_t horizon) {
  if (horizon == 0) throw Error("predict: horizon must be >= 1");
  for (const auto& w : windows) check_window(model.config, w);
  std::vector<std::vector<SegMap>> state(windows.begin(), windows.end());
  std::vector<std::vector<SegMap>> out(windows.size());
  if (windows.empty()) return out;
  NoGradGuard no_grad;
  for (std::size_t step = 0; step < horizon; ++step) {
    std::vector<Tensor<float>> frames;
    for (std::size_t f = 0; f < kSequenceLength; ++f) {
      std::vector<const SegMap*> maps;
      for (const auto& w : state) maps.push_back(&w[f]);
      frames.push_back(one_hot_batch<float>(maps, model.config.num_classes));
    }
    const Var<float> logits = forward_batch<float>(model.params, model.config, frames);
    for (std::size_t n = 0; n < state.size(); ++n) {
      SegMap pred = argmax_map(logits.value(), n);
      out[n].push_back(pred);
      state[n].erase(state[n].begin());
      state[n].push_back(std::move(pred));
    }
  }
  return out;
}

std::vector<SegMap> predict_autoregressive(const Model& model, std::span<const SegMap> inputs,
                                           std::size_t horizon) {
  const std::vector<SegMap> window(inputs.begin(), inputs.end());
  return std::move(rollout_batch(model, std::span(&window, 1), horizon).front());
}

std::vector<SegMap> predict_autoregressive(const Checkpoint& ckpt, std::span<const SegMap> inputs,
                                           std::size_t horizon) {
  return predict_autoregressive(Model::from_checkpoint(ckpt), inputs, horizon);
}

SegMap predict_one_step(const Model& model, std::span<const SegMap> inputs) {
  return predict_autoregressive(model, inputs, 1).front();
}

SegMap predict_one_step(const Checkpoint& ckpt, std::span<const SegMap> inputs) {
  return predict_one_step(Model::from_checkpoint(ckpt), inputs);
}

SegMap copy_last_baseline(std::span<const SegMap> inputs) {
  if (inputs.empty()) throw Error("copy_last: no input maps");
  return inputs.back();
}

std::size_t evaluation_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FUTURESEG_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string("FUTURESEG_THREADS is not a number: ") + env);
    }
  }
  return n;
}

EvalReport evaluate_model(const Model& model, const Dataset& data, std::size_t horizon, std::size_t threads) {
  if (horizon == 0) throw Error("evaluate: horizon must be >= 1");
  if (data.sequences.empty()) throw Error("evaluate: empty dataset");
  const std::size_t k = model.config.num_classes;
  for (const auto& s : data.sequences) {
    if (s.frames.size() < kSequenceLength + horizon) {
      throw ShapeError("evaluate: sequence of " + std::to_string(s.frames.size()) + " frames is too short for horizon " +
                       std::to_string(horizon));
    }
  }
  const std::size_t count = data.sequences.size();
  threads = std::clamp<std::size_t>(threads, 1, count);

  struct Partial {
    std::vector<IouAccumulator> model, copy;
  };
  std::vector<Partial> partials(threads);
  auto work = [&](std::size_t worker) {
    Partial& part = partials[worker];
    for (std::size_t h = 0; h < horizon; ++h) {
      part.model.emplace_back(k);
      part.copy.emplace_back(k);
    }
    const std::size_t begin = count * worker / threads;
    const std::size_t end = count * (worker + 1) / threads;
    for (std::size_t b = begin; b < end; b += kEvalBatch) {
      const std::size_t e = std::min(end, b + kEvalBatch);
      std::vector<std::vector<SegMap>> windows;
      for (std::size_t i = b; i < e; ++i) {
        const auto& fr = data.sequences[i].frames;
        windows.emplace_back(fr.begin(), fr.begin() + kSequenceLength);
      }
      const auto preds = rollout_batch(model, windows, horizon);
      for (std::size_t i = b; i < e; ++i) {
        const auto& fr = data.sequences[i].frames;
        const SegMap last = copy_last_baseline(std::span(fr.data(), kSequenceLength));
        for (std::size_t h = 0; h < horizon; ++h) {
          const SegMap& gt = fr[kSequenceLength + h];
          part.model[h].add(preds[i - b][h], gt);
          part.copy[h].add(last, gt);
        }
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::exception_ptr> failures(threads);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            work(t);
          } catch (...) {
            failures[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  EvalReport report;
  std::vector<double> model_curve, copy_curve;
  for (std::size_t h = 0; h < horizon; ++h) {
    IouAccumulator m(k), c(k);
    for (const auto& p : partials) {
      m.merge(p.model[h]);
      c.merge(p.copy[h]);
    }
    report.model.push_back(m.report());
    report.copy_last.push_back(c.report());
    model_curve.push_back(report.model.back().miou);
    copy_curve.push_back(report.copy_last.back().miou);
  }
  for (auto& r : report.model) r.horizon_miou = model_curve;
  for (auto& r : report.copy_last) r.horizon_miou = copy_curve;
  return report;
}

}  // namespace futureseg
