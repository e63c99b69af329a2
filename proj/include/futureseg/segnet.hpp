#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "futureseg/convlstm.hpp"
#include "futureseg/data.hpp"

namespace futureseg {

inline constexpr std::size_t kScales = 4;

// How the four frames are combined at each scale.
enum class LstmMode : std::uint8_t { none = 0, uni = 1, bi = 2 };

std::string_view to_string(LstmMode mode);
LstmMode parse_lstm_mode(std::string_view text);

struct ModelConfig {
  std::size_t num_classes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, kScales> widths{16, 32, 64, 64};
  LstmMode mode = LstmMode::uni;
  // Bidirectional only: reuse the forward weights for the backward pass.
  bool share_directions = false;

  // ConvLSTM kernel per scale, finest to coarsest.
  static constexpr std::array<std::size_t, kScales> kKernels{3, 3, 3, 1};

  void validate() const;
  // Spatial extent of scale k (0 = finest, stride 2).
  std::size_t scale_height(std::size_t k) const { return height >> (k + 1); }
  std::size_t scale_width(std::size_t k) const { return width >> (k + 1); }
  // Channels of the temporal output g at scale k.
  std::size_t g_channels(std::size_t k) const {
    return widths[k] * (mode == LstmMode::bi ? 2 : 1);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Feature maps of one frame at strides 2, 4, 8, 16.
template <typename T>
struct MultiScaleFeatures {
  std::array<Var<T>, kScales> maps;
};

template <typename T>
struct ModelParams {
  std::array<Var<T>, kScales> enc_w, enc_b;
  std::vector<ConvLstmParams<T>> lstm_fwd;  // uni and bi modes
  std::vector<ConvLstmParams<T>> lstm_bwd;  // bi mode without sharing
  std::vector<Var<T>> fuse_w, fuse_b;       // none mode
  // lat_w[k] maps g-channels of scale k+1 to those of scale k.
  std::array<Var<T>, kScales - 1> lat_w, lat_b;
  Var<T> cls_w, cls_b;

  // Stable, ordered list of every trainable tensor.
  std::vector<NamedParam<T>> named() const;
};

// Seeded initialization. The classifier starts near zero so the initial
// prediction is close to uniform over classes.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg);

// Rebuilds parameters from tensors named as in named(); every expected name
// must be present with matching dims.
template <typename T>
ModelParams<T> params_from_tensors(const ModelConfig& cfg,
                                   const std::vector<std::pair<std::string, Tensor<T>>>& tensors);

// Four stride-2 3x3 conv + rectification stages; the last is dilated by 2.
template <typename T>
MultiScaleFeatures<T> encode(const ModelParams<T>& p, const Var<T>& onehot);

// Per scale: concat the four frames' features and apply one 3x3 convolution.
template <typename T>
std::array<Var<T>, kScales> fusion_baseline(const ModelParams<T>& p,
                                            std::span<const MultiScaleFeatures<T>> frames);

// Top-down fusion from the coarsest g to the finest, then a 1x1 classifier
// and a final x2 upsampling to input resolution.
template <typename T>
Var<T> decode(const ModelParams<T>& p, const std::array<Var<T>, kScales>& g);

// Logits [N,K,H,W] from four one-hot frame batches, oldest first.
template <typename T>
Var<T> forward_batch(const ModelParams<T>& p, const ModelConfig& cfg,
                     std::span<const Tensor<T>> onehot_frames);

// Single-sample forward from four segmentation maps, oldest first.
template <typename T>
Var<T> forward_one_step(const ModelParams<T>& p, const ModelConfig& cfg, std::span<const SegMap> inputs);

}  // namespace futureseg
