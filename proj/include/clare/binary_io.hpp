#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "clare/errors.hpp"

// Little-endian primitives shared by the store and model codecs.
namespace clare::binary_io {

template <typename UInt>
void put_uint(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof bytes);
}

inline void put_f32(std::ostream& out, float value) {
  put_uint(out, std::bit_cast<std::uint32_t>(value));
}

// Throws CorruptFileError on short reads.
template <typename UInt>
UInt get_uint(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) {
    throw CorruptFileError("unexpected end of data");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(static_cast<UInt>(bytes[i]) << (8 * i));
  }
  return value;
}

inline float get_f32(std::istream& in) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(in));
}

inline std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CorruptFileError("unexpected end of data");
  }
  return s;
}

}  // namespace clare::binary_io
