#include "futureseg/checkpoint.hpp"

#include "binary_io.hpp"

namespace futureseg {

Checkpoint Checkpoint::capture(const ModelConfig& cfg, const ModelParams<float>& params, std::uint64_t seed,
                               std::uint32_t epoch) {
  Checkpoint c;
  c.config = cfg;
  c.seed = seed;
  c.epoch = epoch;
  for (const auto& np : params.named()) c.tensors.emplace_back(np.name, np.var.value());
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.raw("FSCK");
  w.u32(kCheckpointVersion);
  const ModelConfig& c = ckpt.config;
  w.u32(static_cast<std::uint32_t>(c.num_classes));
  w.u32(static_cast<std::uint32_t>(c.height));
  w.u32(static_cast<std::uint32_t>(c.width));
  for (std::size_t width : c.widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(c.mode));
  w.u32(c.share_directions ? 1 : 0);
  w.u64(ckpt.seed);
  w.u32(ckpt.epoch);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > 0xFFFF) throw FormatError("checkpoint: tensor name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(4);
    const Dims d = t.dims();
    for (std::size_t e : {d.n, d.c, d.h, d.w}) w.u32(static_cast<std::uint32_t>(e));
    for (float v : t.data()) w.f32(v);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.need(4);
  if (r.raw(4) != "FSCK") throw BadMagicError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw BadVersionError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.num_classes = r.u32();
  c.height = r.u32();
  c.width = r.u32();
  for (std::size_t& width : c.widths) width = r.u32();
  const std::uint32_t mode = r.u32();
  if (mode > static_cast<std::uint32_t>(LstmMode::bi)) throw FormatError("checkpoint: bad mode " + std::to_string(mode));
  c.mode = static_cast<LstmMode>(mode);
  c.share_directions = r.u32() != 0;
  ckpt.seed = r.u64();
  ckpt.epoch = r.u32();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string name(r.raw(len));
    const std::uint8_t rank = r.u8();
    if (rank == 0 || rank > 4) throw FormatError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    std::size_t extents[4] = {1, 1, 1, 1};
    for (std::uint8_t k = 0; k < rank; ++k) extents[4 - rank + k] = r.u32();
    const Dims d{extents[0], extents[1], extents[2], extents[3]};
    r.need(d.count() * 4);
    std::vector<float> data(d.count());
    for (float& v : data) v = r.f32();
    ckpt.tensors.emplace_back(std::move(name), Tensor<float>(d, std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  c.validate();
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace futureseg
