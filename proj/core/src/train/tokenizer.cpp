#include "hmem/train/tokenizer.hpp"

#include <stdexcept>

namespace hmem::train {

std::vector<std::uint32_t> encode(std::string_view text) {
  std::vector<std::uint32_t> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string decode(std::span<const std::uint32_t> ids) {
  std::string s;
  s.reserve(ids.size());
  for (auto t : ids)
    if (t < 256) s.push_back(static_cast<char>(t));
  return s;
}

std::uint32_t prefix_token(std::uint32_t leaf) {
  if (leaf == 0) throw std::invalid_argument("prefix_token: leaf ids are 1-based");
  return kPrefixBase + (leaf - 1) % kPrefixRange;
}

bool is_prefix(std::uint32_t token) noexcept { return token >= kPrefixBase && token < kPrefixBase + kPrefixRange; }

std::uint32_t leaf_from_prefix(std::uint32_t token) {
  if (!is_prefix(token)) throw std::invalid_argument("leaf_from_prefix: token " + std::to_string(token) + " is not a prefix");
  return token - kPrefixBase + 1;
}

std::array<std::uint64_t, kModelVocab> frequency_table(std::span<const std::string> docs) {
  std::array<std::uint64_t, kModelVocab> f{};
  for (const auto& d : docs)
    for (char c : d) ++f[static_cast<unsigned char>(c)];
  return f;
}

}  // namespace hmem::train
