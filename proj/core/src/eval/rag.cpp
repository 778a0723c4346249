#include "hmem/eval/rag.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hmem::eval {

RagStore::RagStore(std::vector<std::string> docs, const cluster::ClusterTree& tree, embed::EmbedderConfig cfg)
    : docs_(std::move(docs)), tree_(&tree), cfg_(std::move(cfg)) {
  if (cfg_.dim != tree.dim()) throw std::invalid_argument("embedder dim does not match the tree");
  level_ = std::min<std::uint32_t>(3, tree.depth());
  dim_ = cfg_.dim;
  emb_.reserve(docs_.size() * dim_);
  members_.resize(level_ + 1);
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto v = embed::embed_text(docs_[i], cfg_);
    emb_.insert(emb_.end(), v.begin(), v.end());
    index_.push_back(tree.assign(v));
    for (std::uint32_t l = 1; l <= level_; ++l) members_[l][index_.back()[l - 1]].push_back(i);
  }
}

RagHit RagStore::retrieve(const std::string& query) const {
  if (docs_.empty()) throw std::runtime_error("empty document store");
  const auto q = embed::embed_text(query, cfg_);
  const auto idx = tree_->assign(q);
  std::vector<std::size_t> all;
  const std::vector<std::size_t>* cand = nullptr;
  std::uint32_t used = 0;
  for (std::uint32_t l = level_; l >= 1 && !cand; --l) {
    auto it = members_[l].find(idx[l - 1]);
    if (it != members_[l].end() && !it->second.empty()) cand = &it->second, used = l;
  }
  if (!cand) {
    all.resize(docs_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    cand = &all;
  }
  RagHit best{0, std::numeric_limits<float>::infinity(), used};
  for (auto i : *cand) {
    const float* e = emb_.data() + i * dim_;
    float d = 0;
    for (std::size_t j = 0; j < dim_; ++j) d += (e[j] - q[j]) * (e[j] - q[j]);
    if (d < best.distance) best.doc = i, best.distance = d;
  }
  return best;
}

}  // namespace hmem::eval
