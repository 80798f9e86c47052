#pragma once

// Little-endian binary primitives shared by the checkpoint, dataset, and
// feature file writers. Byte order is explicit so the formats are stable
// across platforms.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cgreid/errors.hpp"

namespace cgreid::binio {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<uint64_t>(v)); }

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<uint32_t>(v)); }

inline void read_exact(std::istream& is, char* dst, size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw FormatError(std::string("unexpected end of file while reading ") + what);
  }
}

inline uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  read_exact(is, reinterpret_cast<char*>(b), 4, what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_exact(is, reinterpret_cast<char*>(b), 8, what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_u64(is, what));
}

inline float read_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(read_u32(is, what));
}

}  // namespace cgreid::binio
