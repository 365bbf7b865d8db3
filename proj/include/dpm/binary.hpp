#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "dpm/common.hpp"

// Little-endian float32 helpers shared by the binary file formats.
namespace dpm::binary {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

inline void put_f32(std::ostream& out, float value) {
  const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(value));
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.write(bytes, 4);
}

inline void put_f32s(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) put_f32(out, v);
  }
}

inline float get_f32(const unsigned char* bytes) {
  std::uint32_t bits;
  std::memcpy(&bits, bytes, 4);
  return std::bit_cast<float>(to_le(bits));
}

/// Reads exactly n bytes or throws TruncatedFile.
inline void read_exact(std::istream& in, char* dst, std::size_t n, const std::string& what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(Errc::TruncatedFile, what);
  }
}

/// Reads one '\n'-terminated line (without the terminator) or throws TruncatedFile.
inline std::string read_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line) || in.eof()) throw Error(Errc::TruncatedFile, what);
  return line;
}

}  // namespace dpm::binary
