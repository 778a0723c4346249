#include "hmem/eval/recall.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "hmem/common/ini.hpp"
#include "hmem/eval/rag.hpp"
#include "hmem/train/tokenizer.hpp"

namespace hmem::eval {

std::string to_string(RecallMode m) {
  switch (m) {
    case RecallMode::NONE: return "none";
    case RecallMode::GENERIC: return "generic";
    case RecallMode::FETCHED: return "fetched";
    case RecallMode::FETCHED_MASK: return "fetched_mask";
    case RecallMode::RAG: return "rag";
  }
  return "?";
}

RecallMode parse_recall_mode(const std::string& s) {
  std::string t;
  for (char c : s) t += c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto m : {RecallMode::NONE, RecallMode::GENERIC, RecallMode::FETCHED, RecallMode::FETCHED_MASK, RecallMode::RAG})
    if (to_string(m) == t) return m;
  throw ConfigError("eval.modes", "unknown mode '" + s + "'");
}

cluster::ClusterIndex route(const EvalSetup& setup, const std::string& text) {
  if (!setup.tree) throw std::invalid_argument("routing needs a cluster tree");
  return setup.tree->assign(embed::embed_text(text, setup.embedder));
}

std::string greedy_decode(const model::TransformerModel<float>& model, const model::MemoryBinding<float>* mem,
                          const std::vector<std::uint32_t>& prompt, std::size_t max_new) {
  const std::size_t ctx = model.arch().context;
  std::vector<std::uint32_t> seq = prompt;
  const std::size_t keep = ctx > max_new ? ctx - max_new : 1;
  if (seq.size() > keep) seq.erase(seq.begin(), seq.end() - static_cast<std::ptrdiff_t>(keep));
  if (seq.empty()) seq.push_back(train::kEot);
  std::vector<std::uint32_t> out;
  for (std::size_t s = 0; s < max_new; ++s) {
    const auto logits = model.logits(seq, {}, mem);
    const std::size_t V = logits.dim(1);
    const float* row = logits.data().data() + (logits.dim(0) - 1) * V;
    const auto next = static_cast<std::uint32_t>(std::max_element(row, row + V) - row);
    if (next == train::kEot || next == '\n') break;
    out.push_back(next);
    if (next == '.') break;
    seq.push_back(next);
    if (seq.size() > ctx) seq.erase(seq.begin());
  }
  return train::decode(out);
}

std::string extract_answer(const std::string& completion) {
  std::size_t i = 0;
  while (i < completion.size() && std::isspace(static_cast<unsigned char>(completion[i]))) ++i;
  std::size_t j = i;
  while (j < completion.size() && !std::isspace(static_cast<unsigned char>(completion[j]))) ++j;
  const std::string tok = completion.substr(i, j - i);
  for (std::size_t a = 0; a < tok.size(); ++a) {
    if (std::isdigit(static_cast<unsigned char>(tok[a]))) {
      std::size_t b = a;
      while (b < tok.size() && std::isdigit(static_cast<unsigned char>(tok[b]))) ++b;
      return tok.substr(a, b - a);
    }
  }
  std::size_t e = tok.size();
  while (e > 0 && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
  return tok.substr(0, e);
}

namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string strip_zeros(const std::string& s) {
  const auto p = s.find_first_not_of('0');
  return p == std::string::npos ? "0" : s.substr(p);
}

bool same(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) return strip_zeros(a) == strip_zeros(b);
  return a == b;
}

model::MemoryBinding<float> binding_of(const membank::FetchedMemory& f) {
  model::MemoryBinding<float> b;
  b.values = f.blocks;
  return b;
}

}  // namespace

bool answer_matches(const std::string& predicted, const Entity& truth) {
  if (predicted.empty()) return false;
  if (same(predicted, truth.value)) return true;
  return std::any_of(truth.aliases.begin(), truth.aliases.end(), [&](const auto& a) { return same(predicted, a); });
}

Answerer model_answerer(const EvalSetup& setup, RecallMode mode, const membank::BlockMask* mask, const RagStore* rag) {
  if (!setup.model) throw std::invalid_argument("model_answerer needs a model");
  const bool needs_bank = mode == RecallMode::GENERIC || mode == RecallMode::FETCHED || mode == RecallMode::FETCHED_MASK;
  if (needs_bank && !setup.bank) throw std::invalid_argument("mode " + to_string(mode) + " needs a memory bank");
  if ((mode == RecallMode::FETCHED || mode == RecallMode::FETCHED_MASK) && !setup.tree)
    throw std::invalid_argument("mode " + to_string(mode) + " needs a cluster tree");
  if (mode == RecallMode::FETCHED_MASK && !mask) throw std::invalid_argument("fetched_mask needs a block mask");
  if (mode == RecallMode::RAG && !rag) throw std::invalid_argument("rag mode needs a document store");
  return [setup, mode, mask, rag](const Query& q) {
    Completion c;
    const auto prompt = train::encode(q.prompt);
    switch (mode) {
      case RecallMode::NONE:
        c.text = greedy_decode(*setup.model, nullptr, prompt, setup.max_new_tokens);
        break;
      case RecallMode::GENERIC: {
        const auto b = binding_of(setup.bank->fetch_generic());
        c.text = greedy_decode(*setup.model, &b, prompt, setup.max_new_tokens);
        break;
      }
      case RecallMode::FETCHED:
      case RecallMode::FETCHED_MASK: {
        c.index = route(setup, q.prompt);
        const auto b = binding_of(setup.bank->fetch(c.index, mode == RecallMode::FETCHED_MASK ? mask : nullptr,
                                                    setup.mask_policy));
        c.text = greedy_decode(*setup.model, &b, prompt, setup.max_new_tokens);
        break;
      }
      case RecallMode::RAG: {
        const auto hit = rag->retrieve(q.prompt);
        c.index = rag->doc_index(hit.doc);
        c.text = greedy_decode(*setup.model, nullptr, train::encode(rag->doc(hit.doc) + " " + q.prompt),
                               setup.max_new_tokens);
        break;
      }
    }
    return c;
  };
}

RecallResult fact_recall(const std::vector<Entity>& facts, const Answerer& answer, RecallMode mode) {
  RecallResult r;
  r.mode = mode;
  const auto buckets = frequency_buckets(facts, kBuckets);
  std::vector<std::size_t> right(kBuckets, 0);
  r.bucket_size.assign(kBuckets, 0);
  std::size_t total_right = 0;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto& e = facts[i];
    QueryResult q;
    q.entity = e.id;
    q.topic = e.topic;
    q.bucket = buckets[i];
    q.prompt = fact_prompt(e);
    q.mode = mode;
    auto c = answer(Query{e.id, q.prompt});
    q.completion = std::move(c.text);
    q.index = std::move(c.index);
    q.predicted = extract_answer(q.completion);
    q.correct = answer_matches(q.predicted, e);
    ++r.bucket_size[q.bucket];
    if (q.correct) {
      ++right[q.bucket];
      ++total_right;
    }
    r.queries.push_back(std::move(q));
  }
  r.accuracy = facts.empty() ? 0.0 : static_cast<double>(total_right) / static_cast<double>(facts.size());
  for (std::uint32_t b = 0; b < kBuckets; ++b)
    r.bucket_accuracy.push_back(r.bucket_size[b] ? static_cast<double>(right[b]) / static_cast<double>(r.bucket_size[b])
                                                 : std::numeric_limits<double>::quiet_NaN());
  return r;
}

double subset_accuracy(const RecallResult& r, const std::function<bool(const QueryResult&)>& keep) {
  std::size_t n = 0, ok = 0;
  for (const auto& q : r.queries)
    if (keep(q)) {
      ++n;
      ok += q.correct;
    }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

PerplexityResult perplexity(const std::vector<std::string>& docs, const EvalSetup& setup, RecallMode mode,
                            const membank::BlockMask* mask) {
  if (!setup.model) throw std::invalid_argument("perplexity needs a model");
  if (mode == RecallMode::RAG) throw std::invalid_argument("perplexity has no rag mode");
  if (mode != RecallMode::NONE && !setup.bank) throw std::invalid_argument("mode " + to_string(mode) + " needs a memory bank");
  const std::size_t ctx = setup.model->arch().context;
  double nll = 0;
  std::uint64_t count = 0;
  for (const auto& d : docs) {
    auto toks = train::encode(d);
    if (toks.size() > ctx) toks.resize(ctx);
    if (toks.size() < 2) continue;
    membank::FetchedMemory f;
    if (mode == RecallMode::GENERIC) f = setup.bank->fetch_generic();
    if (mode == RecallMode::FETCHED || mode == RecallMode::FETCHED_MASK)
      f = setup.bank->fetch(route(setup, d), mode == RecallMode::FETCHED_MASK ? mask : nullptr, setup.mask_policy);
    const auto b = binding_of(f);
    const auto logits = setup.model->logits(toks, {}, mode == RecallMode::NONE ? nullptr : &b);
    const std::size_t V = logits.dim(1);
    for (std::size_t t = 0; t + 1 < toks.size(); ++t) {
      const float* row = logits.data().data() + t * V;
      double mx = row[0];
      for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, static_cast<double>(row[v]));
      double z = 0;
      for (std::size_t v = 0; v < V; ++v) z += std::exp(static_cast<double>(row[v]) - mx);
      nll += mx + std::log(z) - row[toks[t + 1]];
      ++count;
    }
  }
  PerplexityResult r;
  r.tokens = count;
  r.mean_nll = count ? nll / static_cast<double>(count) : 0.0;
  r.perplexity = std::exp(r.mean_nll);
  return r;
}

std::vector<std::uint32_t> subtrees_by_load(const std::vector<Entity>& facts, const EvalSetup& setup) {
  const std::uint32_t k = setup.tree->branching();
  std::vector<std::size_t> load(k, 0);
  for (const auto& e : facts) ++load[route(setup, fact_prompt(e))[0] - 1];
  std::vector<std::uint32_t> ids(k);
  for (std::uint32_t i = 0; i < k; ++i) ids[i] = i + 1;
  std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return load[a - 1] > load[b - 1]; });
  return ids;
}

std::vector<BlockingPoint> blocking_sweep(const std::vector<Entity>& facts, const EvalSetup& setup,
                                          const std::vector<std::uint32_t>& counts) {
  const auto order = subtrees_by_load(facts, setup);
  std::vector<BlockingPoint> out;
  for (auto n : counts) {
    if (n > order.size()) throw std::invalid_argument("cannot block more subtrees than the tree has");
    BlockingPoint pt;
    pt.blocked_count = n;
    pt.blocked.assign(order.begin(), order.begin() + n);
    membank::BlockMask mask(setup.tree->branching());
    for (auto id : pt.blocked) mask.block_subtree(id);
    const auto r = fact_recall(facts, model_answerer(setup, RecallMode::FETCHED_MASK, &mask), RecallMode::FETCHED_MASK);
    auto is_affected = [&](const QueryResult& q) {
      return std::find(pt.blocked.begin(), pt.blocked.end(), q.index[0]) != pt.blocked.end();
    };
    pt.accuracy = r.accuracy;
    pt.affected_accuracy = subset_accuracy(r, is_affected);
    pt.unaffected_accuracy = subset_accuracy(r, [&](const QueryResult& q) { return !is_affected(q); });
    for (const auto& q : r.queries) (is_affected(q) ? pt.affected : pt.unaffected)++;
    out.push_back(std::move(pt));
  }
  return out;
}

TopicBlocking topic_blocking(const std::vector<Entity>& facts, const EvalSetup& setup, std::uint32_t topic,
                             const RecallResult& fetched, const RecallResult& generic) {
  if (fetched.queries.size() != facts.size() || generic.queries.size() != facts.size())
    throw std::invalid_argument("topic_blocking: results do not match the fact table");
  // majority level-1 subtree per topic, from the fetched run's routing
  std::map<std::uint32_t, std::map<std::uint32_t, std::size_t>> hist;
  for (const auto& q : fetched.queries) ++hist[q.topic][q.index.at(0)];
  auto majority = [&](std::uint32_t t) {
    std::uint32_t best = 0;
    std::size_t n = 0, total = 0;
    for (auto [id, c] : hist[t]) {
      total += c;
      if (c > n) best = id, n = c;
    }
    return std::pair{best, total ? static_cast<double>(n) / static_cast<double>(total) : 0.0};
  };
  TopicBlocking tb;
  tb.topic = topic;
  std::tie(tb.subtree, tb.coverage) = majority(topic);
  if (tb.subtree == 0) throw std::invalid_argument("topic has no facts");

  membank::BlockMask mask(setup.tree->branching());
  mask.block_subtree(tb.subtree);
  const auto masked = fact_recall(facts, model_answerer(setup, RecallMode::FETCHED_MASK, &mask), RecallMode::FETCHED_MASK);
  auto in_topic = [&](std::uint32_t t) { return [t](const QueryResult& q) { return q.topic == t; }; };
  tb.fetched = subset_accuracy(fetched, in_topic(topic));
  tb.masked = subset_accuracy(masked, in_topic(topic));
  tb.generic = subset_accuracy(generic, in_topic(topic));
  for (const auto& [t, h] : hist) {
    if (t == topic || majority(t).first == tb.subtree) continue;
    tb.other_topics.push_back(t);
    tb.max_other_change = std::max(tb.max_other_change,
                                   std::abs(subset_accuracy(masked, in_topic(t)) - subset_accuracy(fetched, in_topic(t))));
  }
  return tb;
}

}  // namespace hmem::eval
