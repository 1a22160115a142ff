#include "mcvo/frontend/descriptor.hpp"

namespace mcvo {

std::string to_hex(const Descriptor& d) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(64, '0');
  for (int byte = 0; byte < 32; ++byte) {
    const unsigned v = (d[byte / 8] >> (8 * (byte % 8))) & 0xffu;
    out[2 * byte] = kDigits[v >> 4];
    out[2 * byte + 1] = kDigits[v & 0xf];
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::optional<Descriptor> descriptor_from_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  Descriptor d{};
  for (int byte = 0; byte < 32; ++byte) {
    const int hi = hex_value(hex[2 * byte]);
    const int lo = hex_value(hex[2 * byte + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    d[byte / 8] |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * (byte % 8));
  }
  return d;
}

}  // namespace mcvo
