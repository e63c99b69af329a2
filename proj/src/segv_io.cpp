#include "futureseg/segv_io.hpp"

#include "binary_io.hpp"

namespace futureseg {

std::string encode_segv(const Dataset& ds) {
  ds.validate();
  detail::ByteWriter w;
  w.raw("SEGV");
  w.u32(kSegvVersion);
  w.u32(static_cast<std::uint32_t>(ds.sequences.size()));
  w.u32(ds.num_classes);
  w.u32(ds.height);
  w.u32(ds.width);
  for (const SegSequence& s : ds.sequences) {
    w.u32(static_cast<std::uint32_t>(s.frames.size()));
    for (const SegMap& m : s.frames) {
      w.raw(std::string_view(reinterpret_cast<const char*>(m.labels.data()), m.labels.size()));
    }
  }
  return w.bytes();
}

Dataset decode_segv(std::string_view bytes) {
  detail::ByteReader r(bytes, "SEGV");
  r.need(4);
  if (r.raw(4) != "SEGV") throw BadMagicError("SEGV: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSegvVersion) throw BadVersionError("SEGV: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  Dataset ds;
  ds.num_classes = r.u32();
  ds.height = r.u32();
  ds.width = r.u32();
  const std::size_t plane = static_cast<std::size_t>(ds.height) * ds.width;
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::uint32_t t = r.u32();
    r.need(static_cast<std::size_t>(t) * plane);
    SegSequence seq;
    seq.frames.reserve(t);
    for (std::uint32_t f = 0; f < t; ++f) {
      const std::string_view px = r.raw(plane);
      SegMap m(ds.height, ds.width);
      std::copy(px.begin(), px.end(), reinterpret_cast<char*>(m.labels.data()));
      seq.frames.push_back(std::move(m));
    }
    ds.sequences.push_back(std::move(seq));
  }
  if (r.remaining() != 0) {
    throw FormatError("SEGV: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  ds.validate();
  return ds;
}

void write_segv(const std::filesystem::path& path, const Dataset& ds) {
  detail::write_file(path, encode_segv(ds));
}

Dataset read_segv(const std::filesystem::path& path) { return decode_segv(detail::read_file(path)); }

}  // namespace futureseg
