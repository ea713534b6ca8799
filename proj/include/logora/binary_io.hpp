#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "logora/errors.hpp"

namespace logora::binary {

// Little-endian fixed-width encoding shared by the checkpoint and dataset
// formats.

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  LOGORA_CHECK(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorCode::kFormatError,
          std::string("truncated stream while reading ") + what);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void write_magic(std::ostream& out, const char (&magic)[5], std::uint8_t version) {
  out.write(magic, 4);
  write_le<std::uint8_t>(out, version);
}

/// Returns the version byte after checking the 4-byte magic.
inline std::uint8_t read_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  in.read(got, 4);
  LOGORA_CHECK(in.gcount() == 4 && std::memcmp(got, magic, 4) == 0, ErrorCode::kFormatError,
          std::string("bad magic, expected \"") + magic + "\"");
  return read_le<std::uint8_t>(in, "version byte");
}

}  // namespace logora::binary
