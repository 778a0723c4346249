#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hmem::cluster {

/// (i_1, ..., i_p) with i_l in [1, k^l].
using ClusterIndex = std::vector<std::uint32_t>;

/// Parent id at level l-1 of a 1-based id at level l.
constexpr std::uint32_t parent_id(std::uint32_t id, std::uint32_t k) noexcept { return (id - 1) / k + 1; }

/// k^l, throwing std::overflow_error past 2^32.
std::uint64_t level_size(std::uint32_t k, std::uint32_t level);

/// True when every entry is in range and each level follows from the next one.
bool nested_consistent(const ClusterIndex& idx, std::uint32_t k);

/// Full index tuple of a leaf id at depth p.
ClusterIndex index_from_leaf(std::uint32_t leaf, std::uint32_t k, std::uint32_t p);

class ClusterTree {
 public:
  ClusterTree() = default;
  /// Zero-filled tree of depth p, branching k, centroid dim c.
  ClusterTree(std::uint32_t p, std::uint32_t k, std::uint32_t c);

  std::uint32_t depth() const noexcept { return p_; }
  std::uint32_t branching() const noexcept { return k_; }
  std::uint32_t dim() const noexcept { return c_; }
  std::uint64_t nodes_at(std::uint32_t level) const { return level_size(k_, level); }

  /// Centroid of node `id` (1-based) at `level` (1-based).
  std::span<const float> centroid(std::uint32_t level, std::uint32_t id) const;
  std::span<float> centroid(std::uint32_t level, std::uint32_t id);
  std::span<const float> level_centroids(std::uint32_t level) const { return centroids_.at(level - 1); }

  std::uint64_t count(std::uint32_t level, std::uint32_t id) const { return counts_.at(level - 1).at(id - 1); }
  std::vector<std::uint64_t>& level_counts(std::uint32_t level) { return counts_.at(level - 1); }
  const std::vector<std::uint64_t>& level_counts(std::uint32_t level) const { return counts_.at(level - 1); }

  /// Greedy descent: at each level pick the child of the current node with minimum
  /// squared L2 distance, ties to the lowest index. Adds the number of centroid
  /// distance evaluations (always p*k) to *comparisons when given.
  ClusterIndex assign(std::span<const float> vec, std::uint64_t* comparisons = nullptr) const;

  std::uint64_t config_digest = 0;
  std::uint64_t parent_digest = 0;

 private:
  std::uint32_t p_ = 0, k_ = 0, c_ = 0;
  std::vector<std::vector<float>> centroids_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

/// Binary format: "HMCT", version, p, k, c, config digest, parent digest, centroids of
/// every level in level order (f32 LE), then per-node counts (u64 LE).
void save_tree(const ClusterTree& tree, const std::string& path);
ClusterTree load_tree(const std::string& path);
std::string serialize_tree(const ClusterTree& tree);
ClusterTree deserialize_tree(const std::string& bytes);

double squared_l2(std::span<const float> a, std::span<const float> b);

}  // namespace hmem::cluster
