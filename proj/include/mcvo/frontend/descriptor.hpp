#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mcvo {

/// 256-bit binary descriptor, bit i stored in word i / 64.
using Descriptor = std::array<std::uint64_t, 4>;

inline int hamming(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

inline bool get_bit(const Descriptor& d, int bit) {
  return (d[bit >> 6] >> (bit & 63)) & 1u;
}

inline void flip_bit(Descriptor& d, int bit) {
  d[bit >> 6] ^= std::uint64_t{1} << (bit & 63);
}

/// 64 lowercase hex characters, byte 0 first.
std::string to_hex(const Descriptor& d);
std::optional<Descriptor> descriptor_from_hex(std::string_view hex);

}  // namespace mcvo
