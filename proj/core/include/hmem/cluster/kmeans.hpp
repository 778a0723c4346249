#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmem/cluster/tree.hpp"

namespace hmem::cluster {

struct ClusterTrainConfig {
  std::size_t steps = 20;
  std::size_t batch_per_step = 6400;
  double balance_limit = 0.094;
  std::uint64_t seed = 0;

  /// Throws hmem::ConfigError unless 1/k <= balance_limit <= 1 and steps, batch > 0.
  void validate(std::uint32_t k) const;
  std::uint64_t digest() const;
};

/// A node being split has fewer distinct vectors than k.
class ClusterError : public std::runtime_error {
 public:
  ClusterError(std::uint32_t level, std::uint32_t node, const std::string& msg)
      : std::runtime_error("cluster node (level " + std::to_string(level) + ", id " + std::to_string(node) +
                           "): " + msg),
        level_(level),
        node_(node) {}
  std::uint32_t level() const noexcept { return level_; }
  std::uint32_t node() const noexcept { return node_; }

 private:
  std::uint32_t level_, node_;
};

/// One balancing pass as seen by the trainer.
struct BalanceEvent {
  std::uint32_t level = 0;      // level of the node being split (0 = root)
  std::uint32_t node = 0;       // 1-based id of that node (1 for the root)
  std::size_t step = 0;
  std::size_t batch = 0;
  std::size_t splits = 0;       // number of largest/smallest splits performed
  double max_fraction = 0;      // within the batch, after balancing
  double max_cumulative = 0;    // over all batches of this node so far
};

struct TrainLog {
  std::vector<BalanceEvent> events;
};

/// Repeatedly splits the largest cluster evenly at random with the smallest one until
/// no cluster holds more than `limit` of the assignments (or no split can help).
/// `sizes` must hold one entry per cluster; it is recomputed from `assign`. Returns the
/// number of splits.
std::size_t balance_split(std::vector<std::uint32_t>& assign, std::vector<std::size_t>& sizes, double limit,
                          std::mt19937_64& rng);

/// Mini-batch k-means on the rows of `points` (n x dim, row-major), k-means++ init,
/// balancing after every assignment step. Centroids are returned row-major (k x dim).
/// `level`/`node` identify the node for errors and log entries.
std::vector<float> balanced_kmeans(std::span<const float> points, std::size_t dim, std::uint32_t k,
                                   const ClusterTrainConfig& cfg, std::uint64_t seed, std::uint32_t level,
                                   std::uint32_t node, std::vector<std::uint64_t>* counts, TrainLog* log);

/// Top-down tree training on the rows of `points` (n x dim). Rows are L2-normalized
/// first; each level is trained on the points routed greedily through the frozen
/// levels above it.
ClusterTree train_tree(std::span<const float> points, std::size_t dim, std::uint32_t p, std::uint32_t k,
                       const ClusterTrainConfig& cfg, TrainLog* log = nullptr);

}  // namespace hmem::cluster
