#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hmem::embed {

struct EmbedderConfig {
  std::size_t dim = 384;
  std::vector<std::size_t> ngram_sizes{3, 4, 5};
  std::uint64_t hash_seed = 0;

  /// Throws hmem::ConfigError on dim < 2, an empty n-gram set or a zero n-gram size.
  void validate() const;
  std::uint64_t digest() const;
};

/// Lowercases ASCII, maps every whitespace run to one space and trims both ends.
std::string normalize_text(std::string_view text);

/// Signed feature hashing of character n-grams, L2-normalized. The normalized text is
/// wrapped in one space on each side so word starts and ends form their own n-grams.
/// Returns the zero vector when no n-gram fits (empty or whitespace-only text).
std::vector<float> embed_text(std::string_view text, const EmbedderConfig& cfg);

/// Raw (unnormalized) signed n-gram counts, exposed for tests.
std::vector<double> hashed_counts(std::string_view text, const EmbedderConfig& cfg);

}  // namespace hmem::embed
