#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmem/cli/run_config.hpp"
#include "hmem/eval/report.hpp"

namespace hmem::cli {

struct CorpusPaths {
  std::string train, heldout, facts;
};

/// Writes train.txt, heldout.txt, facts.tsv and manifest.json into `dir`.
CorpusPaths cmd_gen_corpus(const RunConfig& cfg, const std::string& dir);

struct ClusterPaths {
  std::string tree, index, balance;
};

/// Embeds every line of `corpus`, trains the tree and writes tree.bin, doc_index.tsv
/// (one space-separated index tuple per document) and balance.csv.
ClusterPaths cmd_cluster(const RunConfig& cfg, const std::string& corpus, const std::string& dir);

enum class Stage { ANCHOR, MEMORY };

struct TrainPaths {
  std::string checkpoint;
  std::string bank;  // empty for the anchor stage
  std::string metrics;
};

/// ANCHOR trains the anchor alone with [pretrain]. MEMORY trains memories with [train],
/// starting from `init_checkpoint` when given. Both pack `corpus` per leaf of `tree`.
/// `resume` continues from a state file written by an earlier run of the same stage.
TrainPaths cmd_train(const RunConfig& cfg, Stage stage, const std::string& corpus, const std::string& tree,
                     const std::string& init_checkpoint, const std::string& dir, const std::string& resume = "");

struct EvalInputs {
  std::string checkpoint;
  std::string bank;     // may be empty: only none and rag modes then
  std::string tree;
  std::string facts;
  std::string train_docs;  // store for the RAG baseline
  std::string heldout;     // perplexity documents; empty skips perplexity
};

/// Fact recall per configured mode, perplexity and the optional blocking sweep.
eval::EvalReport cmd_eval(const RunConfig& cfg, const EvalInputs& in, const std::string& dir);

/// Fetched-with-mask recall with the given level-1 subtrees blocked.
eval::EvalReport cmd_block(const RunConfig& cfg, const EvalInputs& in, const std::vector<std::uint32_t>& subtrees,
                           const std::string& dir);

/// Latency table for the configured memory under the tier spec; returns the CSV text
/// and writes latency.csv into `dir`.
std::string cmd_simulate(const RunConfig& cfg, const std::string& tier_spec, const std::string& dir);

/// Gracefully initialized bank for the configured anchor and memory. With header_only
/// only the configuration is written, which is enough for inspect at any scale.
std::string cmd_init_bank(const RunConfig& cfg, const std::string& path, bool header_only);

/// Human-readable summary of a tree, checkpoint, bank, training state or manifest.
/// Manifests are verified: listed files must exist with the recorded digests. For other
/// artifacts `parent`, when given, must match the recorded parent digest. Throws
/// std::runtime_error when a verification fails.
std::string cmd_inspect(const std::string& path, const std::string& parent = "");

struct PipelineResult {
  CorpusPaths corpus;
  ClusterPaths cluster;
  TrainPaths anchor;
  TrainPaths memory;
  eval::EvalReport report;
  std::string report_csv;
};

/// gen-corpus, cluster, train (anchor then memory) and eval under `cfg.out_dir`.
PipelineResult run_pipeline(const RunConfig& cfg);

std::string hex(std::uint64_t v);

/// Keeps freed tensor buffers in the heap instead of returning them to the kernel.
/// Training allocates and frees the same large buffers every step; without this each
/// step pays page faults on fresh mappings. No-op outside glibc.
void tune_allocator();

}  // namespace hmem::cli
