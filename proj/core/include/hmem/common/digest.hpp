#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace hmem {

/// 64-bit FNV-1a. Used for config digests, artifact digests and stable hashing.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 14695981039346656037ull;
  static constexpr std::uint64_t kPrime = 1099511628211ull;

  Fnv1a64& update(std::span<const std::byte> bytes) noexcept {
    for (auto b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a64& update(std::string_view s) noexcept {
    return update(std::as_bytes(std::span(s.data(), s.size())));
  }
  template <class T>
  Fnv1a64& update_pod(const T& v) noexcept {
    return update(std::as_bytes(std::span(&v, 1)));
  }
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

std::uint64_t fnv1a64(std::string_view s) noexcept;
std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept;

/// Digest of a whole file's bytes. Throws std::runtime_error if unreadable.
std::uint64_t file_digest(const std::string& path);

std::string digest_hex(std::uint64_t d);

/// splitmix64 finalizer; used to derive independent seeds from (seed, stream ids).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ull));
}

}  // namespace hmem
