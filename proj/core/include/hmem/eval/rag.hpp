#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hmem/cluster/tree.hpp"
#include "hmem/embed/embedder.hpp"

namespace hmem::eval {

struct RagHit {
  std::size_t doc = 0;
  float distance = 0;
  std::uint32_t level = 0;  // level whose cluster supplied the candidates (0 = whole store)
};

/// Raw documents with their embeddings and tree paths. Search happens inside the query's
/// cluster at level min(3, p), falling back to ancestors when that cluster is empty.
class RagStore {
 public:
  RagStore(std::vector<std::string> docs, const cluster::ClusterTree& tree, embed::EmbedderConfig cfg);

  std::size_t size() const noexcept { return docs_.size(); }
  std::uint32_t search_level() const noexcept { return level_; }
  const std::string& doc(std::size_t i) const { return docs_.at(i); }
  const cluster::ClusterIndex& doc_index(std::size_t i) const { return index_.at(i); }

  RagHit retrieve(const std::string& query) const;

 private:
  std::vector<std::string> docs_;
  const cluster::ClusterTree* tree_;
  embed::EmbedderConfig cfg_;
  std::uint32_t level_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> emb_;
  std::vector<cluster::ClusterIndex> index_;
  // members_[l][id] = docs whose level-l id is id, l in [1, level_]
  std::vector<std::map<std::uint32_t, std::vector<std::size_t>>> members_;
};

}  // namespace hmem::eval
