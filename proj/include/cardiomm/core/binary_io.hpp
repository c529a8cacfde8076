#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "cardiomm/core/common.hpp"

namespace cardiomm {

/// Little-endian float32 array I/O; byte-swaps on big-endian hosts so files
/// are identical everywhere.
inline void write_f32_le(std::ostream& os, const float* data, std::size_t count) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(count) * 4);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &data[i], 4);
      char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                       static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
      os.write(bytes, 4);
    }
  }
}

inline void read_f32_le(std::istream& is, float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count) * 4);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      unsigned char bytes[4];
      is.read(reinterpret_cast<char*>(bytes), 4);
      std::uint32_t bits = std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
                           (std::uint32_t(bytes[2]) << 16) |
                           (std::uint32_t(bytes[3]) << 24);
      std::memcpy(&data[i], &bits, 4);
    }
  }
}

}  // namespace cardiomm
