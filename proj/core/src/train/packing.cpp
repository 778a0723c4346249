#include "hmem/train/packing.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

#include "hmem/train/tokenizer.hpp"

namespace hmem::train {

std::size_t PackedSequence::data_tokens() const {
  return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), TokenKind::DATA));
}

std::vector<std::int32_t> PackedSequence::targets() const {
  const std::size_t n = tokens.size() - 1;
  std::vector<std::int32_t> t(n, -1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t a = i + 1, b = i + 2;  // positions in `tokens`
    if (kinds[a] != TokenKind::DATA) continue;
    if (kinds[b] != TokenKind::DATA && kinds[b] != TokenKind::SEP) continue;
    if (doc_ids[a] != doc_ids[b]) continue;
    t[i] = static_cast<std::int32_t>(tokens[b]);
  }
  return t;
}

std::vector<PackedSequence> pack_corpus(std::span<const PackDoc> docs, std::size_t L, std::uint64_t seed) {
  if (L < 3) throw std::invalid_argument("pack_corpus: sequence length must be at least 3");
  std::map<std::uint32_t, std::vector<const PackDoc*>> by_leaf;
  for (const auto& d : docs) {
    if (d.index.empty()) throw std::invalid_argument("pack_corpus: document without cluster index");
    by_leaf[d.index.back()].push_back(&d);
  }
  std::vector<PackedSequence> out;
  for (const auto& [leaf, list] : by_leaf) {
    PackedSequence cur;
    std::uint32_t doc = 0;
    auto open = [&](const cluster::ClusterIndex& idx) {
      cur = PackedSequence{};
      cur.index = idx;
      cur.tokens.push_back(prefix_token(leaf));
      cur.kinds.push_back(TokenKind::PREFIX);
      cur.doc_ids.push_back(0);
      doc = 1;
    };
    auto close = [&]() {
      std::uint32_t pad_doc = doc + 1;
      while (cur.tokens.size() < L) {
        cur.tokens.push_back(kEot);
        cur.kinds.push_back(TokenKind::PAD);
        cur.doc_ids.push_back(pad_doc++);
      }
      out.push_back(std::move(cur));
      cur = PackedSequence{};
    };
    for (const PackDoc* d : list) {
      const std::size_t len = d->tokens.size();
      if (len == 0) continue;
      const bool has_data = cur.tokens.size() > 1;
      if (!cur.tokens.empty() && cur.tokens.size() + len + (has_data ? 1 : 0) > L) close();
      if (cur.tokens.empty()) open(d->index);
      if (cur.tokens.size() > 1) {
        cur.tokens.push_back(kEot);
        cur.kinds.push_back(TokenKind::SEP);
        cur.doc_ids.push_back(doc++);
      }
      for (std::size_t pos = 0; pos < len;) {
        if (cur.tokens.empty()) open(d->index);
        const std::size_t take = std::min(L - cur.tokens.size(), len - pos);
        for (std::size_t j = 0; j < take; ++j) {
          cur.tokens.push_back(d->tokens[pos + j]);
          cur.kinds.push_back(TokenKind::DATA);
          cur.doc_ids.push_back(doc);
        }
        pos += take;
        if (cur.tokens.size() == L) close();
      }
    }
    if (!cur.tokens.empty()) close();
  }
  for (auto& s : out)
    for (std::size_t i = 0; i < s.kinds.size(); ++i)
      if (s.kinds[i] == TokenKind::SEP) s.doc_boundaries.push_back(static_cast<std::uint32_t>(i));
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace hmem::train
