#pragma once

#include <map>
#include <string>
#include <vector>

#include "hmem/eval/recall.hpp"

namespace hmem::eval {

struct RagStats {
  std::size_t queries = 0;
  std::size_t hits = 0;           // retrieved document states the queried fact
  std::size_t correct_on_hit = 0;
};

struct EvalReport {
  std::uint64_t config_digest = 0;
  std::map<std::string, PerplexityResult> perplexity;  // keyed by mode name
  std::vector<RecallResult> recall;
  std::vector<BlockingPoint> blocking;
  RagStats rag;
};

/// Summary CSV: one row per metric, fixed formatting so identical inputs give identical bytes.
std::string report_csv(const EvalReport& r);
/// One JSON object per query and mode: entity, bucket, prompt, index, mode, predicted, correct.
std::string report_jsonl(const EvalReport& r);
void write_report(const EvalReport& r, const std::string& csv_path, const std::string& jsonl_path);

}  // namespace hmem::eval
