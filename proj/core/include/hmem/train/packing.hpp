#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmem/cluster/tree.hpp"

namespace hmem::train {

enum class TokenKind : std::uint8_t { PREFIX, DATA, SEP, PAD };

/// One training sequence of fixed length L from a single leaf cluster.
/// tokens[0] is the cluster prefix; the model consumes tokens[1..L).
struct PackedSequence {
  cluster::ClusterIndex index;
  std::vector<std::uint32_t> tokens;
  std::vector<TokenKind> kinds;
  /// Document number of every position; a separator belongs to the document it ends,
  /// pads get numbers of their own.
  std::vector<std::uint32_t> doc_ids;
  std::vector<std::uint32_t> doc_boundaries;  // positions of separator tokens

  std::uint32_t leaf() const { return index.back(); }
  std::size_t data_tokens() const;
  /// Model inputs (prefix removed) and their doc ids.
  std::span<const std::uint32_t> inputs() const { return std::span(tokens).subspan(1); }
  std::span<const std::uint32_t> input_doc_ids() const { return std::span(doc_ids).subspan(1); }
  /// Next-token targets for the model inputs, -1 where no loss is taken: the target must
  /// be a data token or separator of the same document as a data-token input.
  std::vector<std::int32_t> targets() const;
};

struct PackDoc {
  std::vector<std::uint32_t> tokens;  // byte tokens, no EOT
  cluster::ClusterIndex index;        // full path to the document's leaf
};

/// Groups documents by leaf (stable order), packs whole documents into sequences of
/// length L (prefix + L-1 tokens) separated by EOT, starts a new sequence when the next
/// document does not fit, splits documents longer than L-1 across sequences of the same
/// leaf, right-pads with EOT and finally shuffles all sequences with `seed`.
std::vector<PackedSequence> pack_corpus(std::span<const PackDoc> docs, std::size_t L, std::uint64_t seed);

}  // namespace hmem::train
