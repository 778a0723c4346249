#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace hmem {

/// Thrown for malformed, truncated or mismatched artifact files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}
}  // namespace detail

/// Little-endian writer over an ostream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    v = detail::byteswap_if_big(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  template <class T>
  void put_array(std::span<const T> xs) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size_bytes()));
    } else {
      for (const T& x : xs) put(x);
    }
  }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

/// Little-endian reader; every short read throws FormatError("truncated ...").
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::string what = "file") : in_(in), what_(std::move(what)) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check(sizeof(T));
    return detail::byteswap_if_big(v);
  }
  std::string get_bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check(n);
    return s;
  }
  std::string get_string(std::size_t max_len = 1u << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw FormatError(what_ + ": string length " + std::to_string(n) + " exceeds limit");
    return get_bytes(n);
  }
  template <class T>
  void get_array(std::span<T> xs) {
    if constexpr (std::endian::native == std::endian::little) {
      in_.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size_bytes()));
      check(xs.size_bytes());
    } else {
      for (T& x : xs) x = get<T>();
    }
  }
  void skip(std::uint64_t n) {
    in_.seekg(static_cast<std::streamoff>(n), std::ios::cur);
    if (!in_) throw FormatError(what_ + ": truncated (seek)");
  }

 private:
  void check(std::size_t n) {
    if (static_cast<std::size_t>(in_.gcount()) != n || !in_)
      throw FormatError(what_ + ": truncated");
  }
  std::istream& in_;
  std::string what_;
};

}  // namespace hmem
