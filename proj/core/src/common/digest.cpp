#include "hmem/common/digest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hmem {

std::uint64_t fnv1a64(std::string_view s) noexcept { return Fnv1a64{}.update(s).value(); }

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept {
  return Fnv1a64{}.update(bytes).value();
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Fnv1a64 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto n = static_cast<std::size_t>(in.gcount());
    h.update(std::as_bytes(std::span(buf.data(), n)));
  }
  return h.value();
}

std::string digest_hex(std::uint64_t d) {
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(d));
  return out;
}

}  // namespace hmem
