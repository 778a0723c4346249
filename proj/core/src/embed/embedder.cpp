#include "hmem/embed/embedder.hpp"

#include <cctype>
#include <cmath>

#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"

namespace hmem::embed {

void EmbedderConfig::validate() const {
  if (dim < 2) throw ConfigError("embed.dim", "must be at least 2, got " + std::to_string(dim));
  if (ngram_sizes.empty()) throw ConfigError("embed.ngram_sizes", "must not be empty");
  for (auto n : ngram_sizes)
    if (n == 0) throw ConfigError("embed.ngram_sizes", "n-gram size 0 is not allowed");
}

std::uint64_t EmbedderConfig::digest() const {
  Fnv1a64 h;
  h.update("embed");
  h.update_pod(static_cast<std::uint64_t>(dim));
  for (auto n : ngram_sizes) h.update_pod(static_cast<std::uint64_t>(n));
  h.update_pod(hash_seed);
  return h.value();
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
  }
  return out;
}

std::vector<double> hashed_counts(std::string_view text, const EmbedderConfig& cfg) {
  cfg.validate();
  std::vector<double> v(cfg.dim, 0.0);
  const std::string norm = normalize_text(text);
  if (norm.empty()) return v;
  const std::string padded = " " + norm + " ";
  const std::uint64_t seed = mix64(cfg.hash_seed);
  for (auto n : cfg.ngram_sizes) {
    if (padded.size() < n) continue;
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      Fnv1a64 h;
      h.update_pod(seed);
      h.update(std::string_view(padded).substr(i, n));
      const std::uint64_t x = mix64(h.value());
      v[(x >> 1) % cfg.dim] += (x & 1) ? 1.0 : -1.0;
    }
  }
  return v;
}

std::vector<float> embed_text(std::string_view text, const EmbedderConfig& cfg) {
  const auto counts = hashed_counts(text, cfg);
  double norm2 = 0;
  for (double x : counts) norm2 += x * x;
  std::vector<float> out(cfg.dim, 0.0f);
  if (norm2 == 0) return out;
  const double inv = 1.0 / std::sqrt(norm2);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<float>(counts[i] * inv);
  return out;
}

}  // namespace hmem::embed
