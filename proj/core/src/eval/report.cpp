#include "hmem/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hmem::eval {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string ids(const std::vector<std::uint32_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string report_csv(const EvalReport& r) {
  std::ostringstream o;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(r.config_digest));
  o << "metric,mode,key,value\n";
  o << "config_digest,,," << digest << "\n";
  for (const auto& [mode, p] : r.perplexity) {
    o << "perplexity," << mode << ",," << fmt(p.perplexity) << "\n";
    o << "tokens," << mode << ",," << p.tokens << "\n";
  }
  for (const auto& rec : r.recall) {
    o << "recall," << to_string(rec.mode) << ",all," << fmt(rec.accuracy) << "\n";
    for (std::size_t b = 0; b < rec.bucket_accuracy.size(); ++b)
      o << "recall," << to_string(rec.mode) << ",bucket" << b << "," << fmt(rec.bucket_accuracy[b]) << "\n";
  }
  for (const auto& pt : r.blocking) {
    const std::string key = "blocked" + std::to_string(pt.blocked_count);
    o << "blocking,fetched_mask," << key << "_ids," << ids(pt.blocked) << "\n";
    o << "blocking,fetched_mask," << key << "_all," << fmt(pt.accuracy) << "\n";
    o << "blocking,fetched_mask," << key << "_affected," << fmt(pt.affected_accuracy) << "\n";
    o << "blocking,fetched_mask," << key << "_unaffected," << fmt(pt.unaffected_accuracy) << "\n";
  }
  if (r.rag.queries) {
    o << "rag_hit_rate,rag,," << fmt(static_cast<double>(r.rag.hits) / static_cast<double>(r.rag.queries)) << "\n";
    o << "rag_copy_accuracy,rag,,"
      << fmt(r.rag.hits ? static_cast<double>(r.rag.correct_on_hit) / static_cast<double>(r.rag.hits) : std::nan(""))
      << "\n";
  }
  return o.str();
}

std::string report_jsonl(const EvalReport& r) {
  std::string out;
  for (const auto& rec : r.recall)
    for (const auto& q : rec.queries) {
      nlohmann::ordered_json j;
      j["entity"] = q.entity;
      j["topic"] = q.topic;
      j["bucket"] = q.bucket;
      j["query"] = q.prompt;
      j["index"] = q.index;
      j["mode"] = to_string(q.mode);
      j["completion"] = q.completion;
      j["predicted"] = q.predicted;
      j["correct"] = q.correct;
      out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    }
  return out;
}

void write_report(const EvalReport& r, const std::string& csv_path, const std::string& jsonl_path) {
  for (const auto& [path, text] : {std::pair{csv_path, report_csv(r)}, std::pair{jsonl_path, report_jsonl(r)}}) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path);
  }
}

}  // namespace hmem::eval
