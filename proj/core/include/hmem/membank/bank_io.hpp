#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmem/membank/bank.hpp"

namespace hmem::membank {

struct BankFileInfo {
  AnchorConfig arch;
  MemoryConfig cfg;
  std::uint32_t k = 0;
  std::uint32_t shard = 0;  // 0 for a full bank, i for level-1 subtree i
  std::vector<bool> levels_present;
  bool generic_present = false;
  std::uint64_t config_digest = 0;
  std::uint64_t parent_digest = 0;
};

/// "HMBK" file: header (version, arch, memory config, k, p, shard id, digests, level
/// presence), then every present level's blocks (f32 LE) and update counters, then the
/// generic block. `levels` restricts which levels are written; an empty list writes none
/// (header only), std::nullopt writes all.
void save_bank(const MemoryBank& bank, const std::string& path,
               const std::optional<std::vector<std::uint32_t>>& levels = std::nullopt);
std::string serialize_bank(const MemoryBank& bank,
                           const std::optional<std::vector<std::uint32_t>>& levels = std::nullopt);

/// Loads a full bank file. `levels` keeps only those levels resident. When `expect_arch`
/// is given, a header whose architecture differs is rejected with FormatError.
MemoryBank load_bank(const std::string& path, const std::optional<std::vector<std::uint32_t>>& levels = std::nullopt,
                     const AnchorConfig* expect_arch = nullptr);
MemoryBank deserialize_bank(const std::string& bytes);
BankFileInfo read_bank_info(const std::string& path);

/// Shard file for level-1 subtree i: at level l it holds blocks [(i-1) k^(l-1), i k^(l-1)).
/// The generic block is stored in shard 1 only.
std::string shard_name(std::uint32_t subtree);
void save_shard(const MemoryBank& bank, std::uint32_t subtree, const std::string& path);
/// Union of shards; throws FormatError on header mismatch, duplicate or missing subtrees.
MemoryBank merge_shards(const std::vector<std::string>& paths);

}  // namespace hmem::membank
