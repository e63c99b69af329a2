#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "futureseg/segnet.hpp"

namespace futureseg {

// Checkpoint layout, all integers little-endian:
//   "FSCK" | version u32 = 1
//   config: K u32 | H u32 | W u32 | widths 4 x u32 | mode u32 | share u32
//           | seed u64 | epoch u32
//   count u32, then per tensor: name length u16 | name bytes | rank u8
//           | dims u32 x rank | payload f32 x prod(dims)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  static Checkpoint capture(const ModelConfig& cfg, const ModelParams<float>& params, std::uint64_t seed,
                            std::uint32_t epoch);
  ModelParams<float> params() const { return params_from_tensors<float>(config, tensors); }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace futureseg
