#include "futureseg/segnet.hpp"

#include <cmath>
#include <map>

#include "futureseg/error.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

std::string_view to_string(LstmMode mode) {
  switch (mode) {
    case LstmMode::none: return "none";
    case LstmMode::uni: return "uni";
    case LstmMode::bi: return "bi";
  }
  return "?";
}

LstmMode parse_lstm_mode(std::string_view text) {
  if (text == "none") return LstmMode::none;
  if (text == "uni") return LstmMode::uni;
  if (text == "bi") return LstmMode::bi;
  throw ConfigError("unknown mode '" + std::string(text) + "' (expected none, uni or bi)");
}

void ModelConfig::validate() const {
  if (num_classes < 1 || num_classes > 256) throw ConfigError("model: K must be in [1,256]");
  if (height == 0 || width == 0 || height % 16 != 0 || width % 16 != 0) {
    throw ShapeError("model: input " + std::to_string(height) + "x" + std::to_string(width) +
                     " must be a positive multiple of 16");
  }
  for (std::size_t c : widths) {
    if (c == 0) throw ConfigError("model: channel widths must be positive");
  }
}

namespace {

ConvOptions stage_options(std::size_t stage) {
  return stage == kScales - 1 ? ConvOptions{2, 2, 2} : ConvOptions{2, 1, 1};
}

std::size_t stage_inputs(const ModelConfig& cfg, std::size_t k) {
  return k == 0 ? cfg.num_classes : cfg.widths[k - 1];
}

ConvLstmShape lstm_shape(const ModelConfig& cfg, std::size_t k) {
  return {cfg.widths[k], cfg.widths[k], cfg.scale_height(k), cfg.scale_width(k),
          ModelConfig::kKernels[k]};
}

bool separate_backward(const ModelConfig& cfg) {
  return cfg.mode == LstmMode::bi && !cfg.share_directions;
}

// Fills every tensor of a parameter set in one place so the zero, random and
// loaded variants share the layout.
template <typename T, typename Make, typename MakeLstm>
ModelParams<T> build(const ModelConfig& cfg, Make make, MakeLstm make_lstm) {
  cfg.validate();
  ModelParams<T> p;
  for (std::size_t k = 0; k < kScales; ++k) {
    p.enc_w[k] = make("enc" + std::to_string(k + 1) + ".w", Dims{cfg.widths[k], stage_inputs(cfg, k), 3, 3},
                      9 * stage_inputs(cfg, k), 0);
    p.enc_b[k] = make("enc" + std::to_string(k + 1) + ".b", Dims{cfg.widths[k], 1, 1, 1}, 0, 0);
  }
  if (cfg.mode != LstmMode::none) {
    for (std::size_t k = 0; k < kScales; ++k) {
      p.lstm_fwd.push_back(make_lstm("lstm" + std::to_string(k + 1) + ".fwd.", lstm_shape(cfg, k)));
      if (separate_backward(cfg)) {
        p.lstm_bwd.push_back(make_lstm("lstm" + std::to_string(k + 1) + ".bwd.", lstm_shape(cfg, k)));
      }
    }
  } else {
    for (std::size_t k = 0; k < kScales; ++k) {
      const std::size_t c = cfg.widths[k];
      p.fuse_w.push_back(make("fuse" + std::to_string(k + 1) + ".w", Dims{c, kSequenceLength * c, 3, 3},
                              9 * kSequenceLength * c, 1));
      p.fuse_b.push_back(make("fuse" + std::to_string(k + 1) + ".b", Dims{c, 1, 1, 1}, 0, 1));
    }
  }
  for (std::size_t k = 0; k + 1 < kScales; ++k) {
    const std::size_t in = cfg.g_channels(k + 1);
    const std::size_t out = cfg.g_channels(k);
    p.lat_w[k] = make("lat" + std::to_string(k + 1) + ".w", Dims{out, in, 1, 1}, in, 1);
    p.lat_b[k] = make("lat" + std::to_string(k + 1) + ".b", Dims{out, 1, 1, 1}, 0, 1);
  }
  const std::size_t in = cfg.g_channels(0);
  p.cls_w = make("cls.w", Dims{cfg.num_classes, in, 1, 1}, in, 2);
  p.cls_b = make("cls.b", Dims{cfg.num_classes, 1, 1, 1}, 0, 2);
  return p;
}

}  // namespace

template <typename T>
std::vector<NamedParam<T>> ModelParams<T>::named() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t k = 0; k < kScales; ++k) {
    out.push_back({"enc" + std::to_string(k + 1) + ".w", enc_w[k]});
    out.push_back({"enc" + std::to_string(k + 1) + ".b", enc_b[k]});
  }
  for (std::size_t k = 0; k < lstm_fwd.size(); ++k) {
    lstm_fwd[k].collect("lstm" + std::to_string(k + 1) + ".fwd.", out);
    if (k < lstm_bwd.size()) lstm_bwd[k].collect("lstm" + std::to_string(k + 1) + ".bwd.", out);
  }
  for (std::size_t k = 0; k < fuse_w.size(); ++k) {
    out.push_back({"fuse" + std::to_string(k + 1) + ".w", fuse_w[k]});
    out.push_back({"fuse" + std::to_string(k + 1) + ".b", fuse_b[k]});
  }
  for (std::size_t k = 0; k + 1 < kScales; ++k) {
    out.push_back({"lat" + std::to_string(k + 1) + ".w", lat_w[k]});
    out.push_back({"lat" + std::to_string(k + 1) + ".b", lat_b[k]});
  }
  out.push_back({"cls.w", cls_w});
  out.push_back({"cls.b", cls_b});
  return out;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::uint64_t counter = 0;
  // kind 0: rectified stage (He-uniform), 1: linear layer, 2: classifier.
  auto make = [&](const std::string&, Dims d, std::size_t fan_in, int kind) {
    const std::uint64_t sub = mix_seed(seed, counter++);
    if (fan_in == 0) return Var<T>::parameter(Tensor<T>(d));
    const double f = static_cast<double>(fan_in);
    double bound = kind == 0 ? std::sqrt(6.0 / f) : 1.0 / std::sqrt(f);
    if (kind == 2) bound *= 0.1;
    return Var<T>::parameter(Tensor<T>::uniform(d, static_cast<T>(bound), sub));
  };
  auto make_lstm = [&](const std::string&, const ConvLstmShape& s) {
    return ConvLstmParams<T>::random(s, mix_seed(seed, counter++));
  };
  return build<T>(cfg, make, make_lstm);
}

template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg) {
  auto make = [](const std::string&, Dims d, std::size_t, int) { return Var<T>::parameter(Tensor<T>(d)); };
  auto make_lstm = [](const std::string&, const ConvLstmShape& s) { return ConvLstmParams<T>::zeros(s); };
  return build<T>(cfg, make, make_lstm);
}

template <typename T>
ModelParams<T> params_from_tensors(const ModelConfig& cfg,
                                   const std::vector<std::pair<std::string, Tensor<T>>>& tensors) {
  std::map<std::string, const Tensor<T>*> by_name;
  for (const auto& [name, t] : tensors) {
    if (!by_name.emplace(name, &t).second) throw FormatError("duplicate parameter '" + name + "'");
  }
  std::size_t used = 0;
  auto fetch = [&](const std::string& name, Dims d) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("missing parameter '" + name + "'");
    if (it->second->dims() != d) {
      throw ShapeError("parameter '" + name + "' has dims " + it->second->dims().str() + ", expected " + d.str());
    }
    ++used;
    return Var<T>::parameter(*it->second);
  };
  auto make = [&](const std::string& name, Dims d, std::size_t, int) { return fetch(name, d); };
  auto make_lstm = [&](const std::string& prefix, const ConvLstmShape& s) {
    ConvLstmParams<T> ref = ConvLstmParams<T>::zeros(s);
    std::vector<NamedParam<T>> names;
    ref.collect(prefix, names);
    std::vector<Tensor<T>> ts;
    for (const auto& np : names) ts.push_back(fetch(np.name, np.var.dims()).value());
    return ConvLstmParams<T>::from_tensors(ts);
  };
  ModelParams<T> p = build<T>(cfg, make, make_lstm);
  if (used != tensors.size()) {
    throw FormatError("checkpoint holds " + std::to_string(tensors.size() - used) +
                      " tensors the model config does not use");
  }
  return p;
}

template <typename T>
MultiScaleFeatures<T> encode(const ModelParams<T>& p, const Var<T>& onehot) {
  const Dims d = onehot.dims();
  if (d.c != p.enc_w[0].dims().c) {
    throw ShapeError("encode: input has " + std::to_string(d.c) + " channels, model expects K=" +
                     std::to_string(p.enc_w[0].dims().c));
  }
  if (d.h % 16 != 0 || d.w % 16 != 0 || d.h == 0 || d.w == 0) {
    throw ShapeError("encode: input " + std::to_string(d.h) + "x" + std::to_string(d.w) +
                     " not divisible by 16");
  }
  MultiScaleFeatures<T> out;
  Var<T> x = onehot;
  for (std::size_t k = 0; k < kScales; ++k) {
    x = relu(conv2d(x, p.enc_w[k], p.enc_b[k], stage_options(k)));
    out.maps[k] = x;
  }
  return out;
}

template <typename T>
std::array<Var<T>, kScales> fusion_baseline(const ModelParams<T>& p,
                                            std::span<const MultiScaleFeatures<T>> frames) {
  if (frames.size() != kSequenceLength) {
    throw ShapeError("fusion_baseline: expected 4 frames, got " + std::to_string(frames.size()));
  }
  if (p.fuse_w.size() != kScales) throw ShapeError("fusion_baseline: model has no fusion weights");
  std::array<Var<T>, kScales> g;
  for (std::size_t k = 0; k < kScales; ++k) {
    std::vector<Var<T>> parts;
    for (const auto& f : frames) parts.push_back(f.maps[k]);
    g[k] = conv2d(concat<T>(1, parts), p.fuse_w[k], p.fuse_b[k], ConvOptions{1, 1, 1});
  }
  return g;
}

template <typename T>
Var<T> decode(const ModelParams<T>& p, const std::array<Var<T>, kScales>& g) {
  for (std::size_t k = 0; k < kScales; ++k) {
    if (!g[k].defined()) throw ShapeError("decode: exactly four scales are required");
  }
  for (std::size_t k = 0; k + 1 < kScales; ++k) {
    const Dims fine = g[k].dims();
    const Dims coarse = g[k + 1].dims();
    if (fine.h != 2 * coarse.h || fine.w != 2 * coarse.w || fine.n != coarse.n) {
      throw ShapeError("decode: pyramid inconsistent between scales " + std::to_string(k + 1) + " (" +
                       fine.str() + ") and " + std::to_string(k + 2) + " (" + coarse.str() + ")");
    }
  }
  Var<T> z = g[kScales - 1];
  for (std::size_t k = kScales - 1; k-- > 0;) {
    z = add(upsample_nearest(conv2d(z, p.lat_w[k], p.lat_b[k]), 2), g[k]);
  }
  return upsample_nearest(conv2d(z, p.cls_w, p.cls_b), 2);
}

template <typename T>
Var<T> forward_batch(const ModelParams<T>& p, const ModelConfig& cfg,
                     std::span<const Tensor<T>> onehot_frames) {
  if (onehot_frames.size() != kSequenceLength) {
    throw ShapeError("forward: expected 4 input frames, got " + std::to_string(onehot_frames.size()));
  }
  const Dims d0 = onehot_frames[0].dims();
  if (d0.c != cfg.num_classes || d0.h != cfg.height || d0.w != cfg.width) {
    throw ShapeError("forward: frames " + d0.str() + " do not match the model config");
  }
  std::vector<MultiScaleFeatures<T>> feats;
  for (const Tensor<T>& f : onehot_frames) {
    if (f.dims() != d0) throw ShapeError("forward: input frames differ in dims");
    feats.push_back(encode(p, Var<T>::constant(f)));
  }
  std::array<Var<T>, kScales> g;
  if (cfg.mode == LstmMode::none) {
    g = fusion_baseline<T>(p, feats);
  } else {
    for (std::size_t k = 0; k < kScales; ++k) {
      std::vector<Var<T>> seq;
      for (const auto& f : feats) seq.push_back(f.maps[k]);
      if (cfg.mode == LstmMode::uni) {
        g[k] = run_sequence<T>(p.lstm_fwd[k], seq);
      } else {
        const ConvLstmParams<T>& bwd = cfg.share_directions ? p.lstm_fwd[k] : p.lstm_bwd[k];
        g[k] = run_bidirectional<T>(p.lstm_fwd[k], bwd, seq);
      }
    }
  }
  return decode(p, g);
}

template <typename T>
Var<T> forward_one_step(const ModelParams<T>& p, const ModelConfig& cfg, std::span<const SegMap> inputs) {
  if (inputs.size() != kSequenceLength) {
    throw ShapeError("forward: expected 4 input maps, got " + std::to_string(inputs.size()));
  }
  std::vector<Tensor<T>> frames;
  for (const SegMap& m : inputs) frames.push_back(one_hot_encode<T>(m, cfg.num_classes));
  return forward_batch<T>(p, cfg, frames);
}

#define FUTURESEG_INSTANTIATE_SEGNET(T)                                                             \
  template struct ModelParams<T>;                                                                  \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                       \
  template ModelParams<T> zero_params<T>(const ModelConfig&);                                      \
  template ModelParams<T> params_from_tensors<T>(const ModelConfig&,                               \
                                                 const std::vector<std::pair<std::string, Tensor<T>>>&); \
  template MultiScaleFeatures<T> encode(const ModelParams<T>&, const Var<T>&);                     \
  template std::array<Var<T>, kScales> fusion_baseline(const ModelParams<T>&,                      \
                                                       std::span<const MultiScaleFeatures<T>>);    \
  template Var<T> decode(const ModelParams<T>&, const std::array<Var<T>, kScales>&);               \
  template Var<T> forward_batch(const ModelParams<T>&, const ModelConfig&, std::span<const Tensor<T>>); \
  template Var<T> forward_one_step(const ModelParams<T>&, const ModelConfig&, std::span<const SegMap>);

FUTURESEG_INSTANTIATE_SEGNET(float)
FUTURESEG_INSTANTIATE_SEGNET(double)

}  // namespace futureseg
