#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hmem/cluster/tree.hpp"
#include "hmem/embed/embedder.hpp"
#include "hmem/eval/corpus.hpp"
#include "hmem/membank/bank.hpp"
#include "hmem/model/transformer.hpp"

namespace hmem::eval {

class RagStore;

enum class RecallMode { NONE, GENERIC, FETCHED, FETCHED_MASK, RAG };
std::string to_string(RecallMode m);
RecallMode parse_recall_mode(const std::string& s);

/// Everything a model-backed evaluation needs. `bank` and `tree` may be null for
/// modes that do not touch memory.
struct EvalSetup {
  const model::TransformerModel<float>* model = nullptr;
  const membank::MemoryBank* bank = nullptr;
  const cluster::ClusterTree* tree = nullptr;
  embed::EmbedderConfig embedder;
  std::size_t max_new_tokens = 6;
  membank::MaskPolicy mask_policy = membank::MaskPolicy::GENERIC;
};

/// Embeds `text` and routes it greedily through the tree.
cluster::ClusterIndex route(const EvalSetup& setup, const std::string& text);

/// Greedy continuation; stops at EOT, '.', newline or max_new tokens. The prompt is
/// left-truncated so prompt plus continuation fit the context.
std::string greedy_decode(const model::TransformerModel<float>& model, const model::MemoryBinding<float>* mem,
                          const std::vector<std::uint32_t>& prompt, std::size_t max_new);

/// First integer in the leading token of `completion`, else that token with trailing
/// punctuation removed.
std::string extract_answer(const std::string& completion);
/// Exact match against the value or any alias; integers compare numerically.
bool answer_matches(const std::string& predicted, const Entity& truth);

/// The query carries only what retrieval may see.
struct Query {
  std::uint32_t entity = 0;
  std::string prompt;
};
struct Completion {
  std::string text;
  cluster::ClusterIndex index;  // empty when no routing happened
};
using Answerer = std::function<Completion(const Query&)>;

/// Model-backed answerer for a mode. FETCHED_MASK requires `mask`; RAG requires `rag`.
Answerer model_answerer(const EvalSetup& setup, RecallMode mode, const membank::BlockMask* mask = nullptr,
                        const RagStore* rag = nullptr);

struct QueryResult {
  std::uint32_t entity = 0;
  std::uint32_t topic = 0;
  std::uint32_t bucket = 0;
  std::string prompt;
  cluster::ClusterIndex index;
  RecallMode mode = RecallMode::NONE;
  std::string completion;
  std::string predicted;
  bool correct = false;
};

struct RecallResult {
  RecallMode mode = RecallMode::NONE;
  double accuracy = 0;
  std::vector<double> bucket_accuracy;
  std::vector<std::size_t> bucket_size;
  std::vector<QueryResult> queries;
};

constexpr std::uint32_t kBuckets = 5;

RecallResult fact_recall(const std::vector<Entity>& facts, const Answerer& answer, RecallMode mode);

/// Accuracy over the subset of `r.queries` selected by `keep`; NaN for an empty subset.
double subset_accuracy(const RecallResult& r, const std::function<bool(const QueryResult&)>& keep);

struct PerplexityResult {
  double perplexity = 0;
  double mean_nll = 0;
  std::uint64_t tokens = 0;
};

/// exp(mean next-token NLL) over byte-encoded documents truncated to the context. For
/// FETCHED and FETCHED_MASK the memory is retrieved from the full document text.
PerplexityResult perplexity(const std::vector<std::string>& docs, const EvalSetup& setup, RecallMode mode,
                            const membank::BlockMask* mask = nullptr);

struct BlockingPoint {
  std::uint32_t blocked_count = 0;
  std::vector<std::uint32_t> blocked;  // level-1 ids
  double accuracy = 0;
  double affected_accuracy = 0;  // NaN if no affected queries
  double unaffected_accuracy = 0;
  std::size_t affected = 0;
  std::size_t unaffected = 0;
};

/// Level-1 ids ordered by how many prompts route into them (descending, ties by id).
std::vector<std::uint32_t> subtrees_by_load(const std::vector<Entity>& facts, const EvalSetup& setup);

/// For each count in `counts`, blocks that many of the most-queried level-1 subtrees and
/// evaluates fetched-with-mask recall. A query is affected when its level-1 id is blocked.
std::vector<BlockingPoint> blocking_sweep(const std::vector<Entity>& facts, const EvalSetup& setup,
                                          const std::vector<std::uint32_t>& counts);

struct TopicBlocking {
  std::uint32_t topic = 0;
  std::uint32_t subtree = 0;  // level-1 id receiving most of the topic's prompts
  double coverage = 0;        // fraction of the topic's prompts routed there
  double fetched = 0;         // topic recall, nothing blocked
  double masked = 0;          // topic recall, subtree blocked
  double generic = 0;         // topic recall with generic memory
  std::vector<std::uint32_t> other_topics;  // topics whose majority subtree differs
  double max_other_change = 0;              // max |masked - fetched| over other_topics
};

/// Blocks the majority subtree of `topic`. Reuses the given per-mode results so each
/// query is decoded once per mode.
TopicBlocking topic_blocking(const std::vector<Entity>& facts, const EvalSetup& setup, std::uint32_t topic,
                             const RecallResult& fetched, const RecallResult& generic);

}  // namespace hmem::eval
