#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmem/cluster/kmeans.hpp"
#include "hmem/common/ini.hpp"
#include "hmem/embed/embedder.hpp"
#include "hmem/eval/corpus.hpp"
#include "hmem/model/config.hpp"
#include "hmem/train/trainer.hpp"

namespace hmem::cli {

struct ClusterOptions {
  std::uint32_t depth = 2;
  std::uint32_t branching = 4;
  cluster::ClusterTrainConfig train;
};

struct EvalOptions {
  std::size_t max_new_tokens = 6;
  std::vector<std::string> modes{"none", "generic", "fetched", "rag"};
  /// Level-1 subtree counts for the blocking sweep; empty skips the sweep.
  std::vector<std::uint32_t> block_counts;
  bool perplexity = true;
};

/// Whole-pipeline configuration read from one INI file. Component seeds derive from
/// the global seed unless a section sets its own `seed`.
struct RunConfig {
  IniConfig ini;
  std::uint64_t seed = 0;
  std::string out_dir = "run";

  embed::EmbedderConfig embedder;
  eval::SyntheticCorpusSpec corpus;
  ClusterOptions cluster;
  model::AnchorConfig anchor;
  model::MemoryConfig memory;
  train::TrainConfig pretrain;  // anchor-only stage
  train::TrainConfig train;     // memory stage
  std::uint64_t bank_seed = 0;
  std::uint64_t anchor_seed = 0;
  EvalOptions eval;

  /// Digest of the canonical INI text after overrides.
  std::uint64_t digest() const { return ini.digest(); }

  /// Parses and validates. Throws ConfigError naming the offending field.
  static RunConfig from_ini(IniConfig ini, std::optional<std::uint64_t> seed_override = std::nullopt);
  static RunConfig load(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt,
                        std::optional<std::string> out_override = std::nullopt);
};

/// Output directory: --out, else HMEM_OUT_DIR, else "run". The only environment override.
std::string resolve_out_dir(const std::optional<std::string>& flag);

}  // namespace hmem::cli
