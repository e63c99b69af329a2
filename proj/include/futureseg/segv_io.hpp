#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "futureseg/data.hpp"

namespace futureseg {

// SEGV layout, all integers little-endian:
//   "SEGV" | version u32 = 1 | count u32 | K u32 | H u32 | W u32
//   then per sequence: T u32 | T*H*W class-index bytes.
inline constexpr std::uint32_t kSegvVersion = 1;
inline constexpr std::size_t kSegvHeaderBytes = 24;

std::string encode_segv(const Dataset& ds);
// Throws BadMagicError, BadVersionError, TruncatedError, ClassRangeError or
// FormatError (trailing bytes).
Dataset decode_segv(std::string_view bytes);

void write_segv(const std::filesystem::path& path, const Dataset& ds);
Dataset read_segv(const std::filesystem::path& path);

}  // namespace futureseg
