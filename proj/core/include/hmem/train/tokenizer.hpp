#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hmem::train {

/// Byte-level vocabulary: ids 0..255 are bytes, 256 is EOT, 257 and 258 are reserved,
/// and cluster-prefix ids start at 259. The model vocabulary ends before the prefixes
/// because the prefix is stripped before the model sees a sequence.
inline constexpr std::uint32_t kEot = 256;
inline constexpr std::uint32_t kModelVocab = 259;
inline constexpr std::uint32_t kPrefixBase = 259;
inline constexpr std::uint32_t kPrefixRange = 4096;

std::vector<std::uint32_t> encode(std::string_view text);
/// Bytes only; EOT, reserved and prefix ids are dropped.
std::string decode(std::span<const std::uint32_t> ids);

std::uint32_t prefix_token(std::uint32_t leaf);
bool is_prefix(std::uint32_t token) noexcept;
/// Inverse of prefix_token; exact for leaf ids 1..4096, larger ids wrap.
std::uint32_t leaf_from_prefix(std::uint32_t token);

/// Token counts over the model vocabulary for byte-encoded documents.
std::array<std::uint64_t, kModelVocab> frequency_table(std::span<const std::string> docs);

}  // namespace hmem::train
