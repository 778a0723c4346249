#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "hmem/cluster/tree.hpp"
#include "hmem/model/config.hpp"
#include "hmem/model/layout.hpp"

namespace hmem::membank {

using cluster::ClusterIndex;
using model::AnchorConfig;
using model::MemoryConfig;

struct Accounting {
  std::vector<std::uint64_t> level_sizes;  // s_l
  std::uint64_t fetch_size = 0;            // sum s_l
  std::uint64_t bank_size = 0;             // sum s_l k^l
};

/// Throws std::invalid_argument if the config depth differs from p.
Accounting bank_accounting(const MemoryConfig& cfg, const AnchorConfig& arch, std::uint32_t k, std::uint32_t p);

/// Blocked tree nodes. Blocking a node blocks its whole subtree.
class BlockMask {
 public:
  explicit BlockMask(std::uint32_t k = 1) : k_(k) {}
  void block(std::uint32_t level, std::uint32_t id) { nodes_.emplace(level, id); }
  void block_subtree(std::uint32_t level1_id) { block(1, level1_id); }
  /// True if (level, id) or any ancestor of it is blocked.
  bool blocked(std::uint32_t level, std::uint32_t id) const;
  bool empty() const noexcept { return nodes_.empty(); }
  const std::set<std::pair<std::uint32_t, std::uint32_t>>& nodes() const noexcept { return nodes_; }

 private:
  std::uint32_t k_;
  std::set<std::pair<std::uint32_t, std::uint32_t>> nodes_;
};

/// What replaces a blocked block at fetch time.
enum class MaskPolicy { GENERIC, ZERO };

struct BlockRef {
  std::uint32_t level = 0;  // 1-based
  std::uint32_t id = 0;     // 1-based; 0 for generic or zero substitutes
  enum Kind : std::uint8_t { CLUSTER, GENERIC, ZERO, EMPTY } kind = EMPTY;
};

/// References into the bank, one per level (empty spans for r_l = 0).
struct FetchedMemory {
  std::vector<std::span<const float>> blocks;
  std::vector<BlockRef> refs;
  std::size_t total() const noexcept;
};

/// Per-level contiguous block storage plus the generic block, whose level-l slice has
/// the size of one level-l block.
class MemoryBank {
 public:
  MemoryBank() = default;
  /// Allocates every level (zero-filled) unless `allocate` is false.
  MemoryBank(AnchorConfig arch, MemoryConfig cfg, std::uint32_t k, bool allocate = true);

  const AnchorConfig& arch() const noexcept { return arch_; }
  const MemoryConfig& config() const noexcept { return cfg_; }
  const model::MemorySlotLayout& layout() const noexcept { return layout_; }
  std::uint32_t depth() const noexcept { return cfg_.depth(); }
  std::uint32_t branching() const noexcept { return k_; }
  const Accounting& accounting() const noexcept { return acc_; }

  std::size_t block_size(std::uint32_t level) const { return acc_.level_sizes.at(level - 1); }
  std::uint64_t blocks_at(std::uint32_t level) const { return cluster::level_size(k_, level); }
  std::size_t generic_offset(std::uint32_t level) const;

  bool level_present(std::uint32_t level) const { return present_.at(level - 1); }
  bool generic_present() const noexcept { return generic_present_; }
  void allocate_level(std::uint32_t level);
  void allocate_generic();
  void drop_level(std::uint32_t level);

  std::span<const float> block(std::uint32_t level, std::uint32_t id) const;
  std::span<float> block(std::uint32_t level, std::uint32_t id);
  std::span<const float> generic() const;
  std::span<float> generic();
  std::span<const float> generic_slice(std::uint32_t level) const { return generic().subspan(generic_offset(level), block_size(level)); }
  std::span<const float> level_data(std::uint32_t level) const;
  std::span<float> level_data(std::uint32_t level);

  /// Update counters, bumped by the trainer each time a block receives an optimizer step.
  std::vector<std::uint64_t>& update_counts(std::uint32_t level) { return counts_.at(level - 1); }
  const std::vector<std::uint64_t>& update_counts(std::uint32_t level) const { return counts_.at(level - 1); }
  std::uint64_t& generic_updates() noexcept { return generic_count_; }
  std::uint64_t generic_updates() const noexcept { return generic_count_; }

  /// Blocks at (l, idx[l-1]) for every non-empty level; blocked ones substituted per `policy`.
  FetchedMemory fetch(const ClusterIndex& idx, const BlockMask* mask = nullptr,
                      MaskPolicy policy = MaskPolicy::GENERIC) const;
  FetchedMemory fetch_generic() const;

  std::uint64_t config_digest = 0;
  std::uint64_t parent_digest = 0;

 private:
  AnchorConfig arch_;
  MemoryConfig cfg_;
  model::MemorySlotLayout layout_;
  std::uint32_t k_ = 1;
  Accounting acc_;
  std::vector<std::vector<float>> levels_;
  std::vector<bool> present_;
  std::vector<float> generic_;
  bool generic_present_ = false;
  std::vector<float> zeros_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::uint64_t generic_count_ = 0;
};

/// Every block (and the generic block) gracefully initialized from its own seed stream.
MemoryBank init_bank(const MemoryConfig& cfg, const AnchorConfig& arch, std::uint32_t k, std::uint64_t seed);

/// Digest of the bytes of one block.
std::uint64_t block_digest(std::span<const float> block);

}  // namespace hmem::membank
