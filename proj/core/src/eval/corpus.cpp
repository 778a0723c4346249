#include "hmem/eval/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"

namespace hmem::eval {

void SyntheticCorpusSpec::validate() const {
  if (num_topics == 0) throw ConfigError("corpus.num_topics", "must be positive");
  if (entities_per_topic == 0) throw ConfigError("corpus.entities_per_topic", "must be positive");
  if (zipf_exponent < 0) throw ConfigError("corpus.zipf_exponent", "must be non-negative");
  if (total_mentions < static_cast<std::uint64_t>(num_topics) * entities_per_topic)
    throw ConfigError("corpus.total_mentions", "must be at least the number of entities");
  if (min_words == 0 || max_words < min_words) throw ConfigError("corpus.max_words", "need 0 < min_words <= max_words");
  if (words_per_topic < 4) throw ConfigError("corpus.words_per_topic", "must be at least 4");
  if (value_max == 0) throw ConfigError("corpus.value_max", "must be positive");
}

std::uint64_t SyntheticCorpusSpec::digest() const {
  Fnv1a64 h;
  h.update("corpus");
  for (std::uint64_t v : {std::uint64_t{num_topics}, std::uint64_t{entities_per_topic}, total_mentions, std::uint64_t{filler_sentences},
                          std::uint64_t{min_words}, std::uint64_t{max_words}, std::uint64_t{words_per_topic},
                          std::uint64_t{value_max}, std::uint64_t{heldout_docs}, seed})
    h.update_pod(v);
  h.update_pod(zipf_exponent);
  return h.value();
}

SyntheticCorpusSpec SyntheticCorpusSpec::from_ini(const IniConfig& ini, const std::string& s) {
  SyntheticCorpusSpec c;
  auto u = [&](const char* key, std::uint64_t fb) {
    const auto v = ini.get_int(s, key, static_cast<std::int64_t>(fb));
    if (v < 0) throw ConfigError(s + "." + key, "must be non-negative");
    return static_cast<std::uint64_t>(v);
  };
  c.num_topics = static_cast<std::uint32_t>(u("num_topics", c.num_topics));
  c.entities_per_topic = static_cast<std::uint32_t>(u("entities_per_topic", c.entities_per_topic));
  c.zipf_exponent = ini.get_double(s, "zipf_exponent", c.zipf_exponent);
  c.total_mentions = u("total_mentions", c.total_mentions);
  c.filler_sentences = static_cast<std::uint32_t>(u("filler_sentences", c.filler_sentences));
  c.min_words = static_cast<std::uint32_t>(u("min_words", c.min_words));
  c.max_words = static_cast<std::uint32_t>(u("max_words", c.max_words));
  c.words_per_topic = static_cast<std::uint32_t>(u("words_per_topic", c.words_per_topic));
  c.value_max = static_cast<std::uint32_t>(u("value_max", c.value_max));
  c.heldout_docs = static_cast<std::uint32_t>(u("heldout_docs", c.heldout_docs));
  c.seed = u("seed", c.seed);
  c.validate();
  return c;
}

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                   "br", "dr", "gr", "kr", "pl", "st", "tr", "sk", "sh", "th", "ch", "qu"};
constexpr const char* kNuclei[] = {"a", "e", "i", "o", "u", "ae", "ei", "ou", "ia", "oa"};
constexpr const char* kCodas[] = {"", "", "n", "r", "l", "x", "s", "m", "th", "nd"};

struct Topic {
  std::vector<std::string> syllables;
  std::string attribute;
  std::vector<std::string> words;
  std::vector<std::vector<std::uint32_t>> next;  // Markov successors per word
};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

template <class T, std::size_t N>
const T& pick(const T (&arr)[N], std::mt19937_64& rng) {
  return arr[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

std::string pick(const std::vector<std::string>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::vector<Topic> make_topics(const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  std::set<std::string> used_syllables, used_attrs;
  std::vector<Topic> topics(spec.num_topics);
  for (auto& t : topics) {
    while (t.syllables.size() < 8) {
      std::string s = std::string(pick(kOnsets, rng)) + pick(kNuclei, rng) + pick(kCodas, rng);
      if (used_syllables.insert(s).second) t.syllables.push_back(s);
    }
    do {
      t.attribute = pick(t.syllables, rng) + pick(t.syllables, rng) + "ity";
    } while (!used_attrs.insert(t.attribute).second);
    std::set<std::string> words;
    while (words.size() < spec.words_per_topic) {
      const int n = std::uniform_int_distribution<int>(1, 2)(rng);
      std::string w;
      for (int i = 0; i < n; ++i) w += pick(t.syllables, rng);
      words.insert(w);
    }
    t.words.assign(words.begin(), words.end());
    std::shuffle(t.words.begin(), t.words.end(), rng);
    t.next.resize(t.words.size());
    std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(t.words.size() - 1));
    for (auto& nx : t.next)
      for (int i = 0; i < 3; ++i) nx.push_back(any(rng));
  }
  return topics;
}

std::string babble(const Topic& t, const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  const auto n = std::uniform_int_distribution<std::uint32_t>(spec.min_words, spec.max_words)(rng);
  std::uint32_t w = std::uniform_int_distribution<std::uint32_t>(0, static_cast<std::uint32_t>(t.words.size() - 1))(rng);
  std::string s = capitalize(t.words[w]);
  for (std::uint32_t i = 1; i < n; ++i) {
    w = t.next[w][std::uniform_int_distribution<std::size_t>(0, t.next[w].size() - 1)(rng)];
    s += " " + t.words[w];
  }
  return s + ".";
}

std::string make_doc(const Entity& e, const Topic& t, const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  const auto slot = std::uniform_int_distribution<std::uint32_t>(0, spec.filler_sentences)(rng);
  std::string doc;
  for (std::uint32_t i = 0; i <= spec.filler_sentences; ++i) {
    if (!doc.empty()) doc += ' ';
    doc += i == slot ? fact_sentence(e) : babble(t, spec, rng);
  }
  return doc;
}

}  // namespace

std::string fact_prompt(const Entity& e) { return "The " + e.attribute + " of " + e.name + " is"; }
std::string fact_sentence(const Entity& e) { return fact_prompt(e) + " " + e.value + "."; }

Corpus gen_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, 0x636f72707573ull));
  const auto topics = make_topics(spec, rng);
  Corpus c;
  const std::uint32_t E = spec.num_topics * spec.entities_per_topic;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < E; ++i) {
    Entity e;
    e.id = i;
    e.topic = i / spec.entities_per_topic;
    const auto& t = topics[e.topic];
    do {
      const int n = std::uniform_int_distribution<int>(2, 3)(rng);
      e.name.clear();
      for (int j = 0; j < n; ++j) e.name += pick(t.syllables, rng);
      e.name = capitalize(e.name);
    } while (!names.insert(e.name).second);
    e.attribute = t.attribute;
    e.value = std::to_string(std::uniform_int_distribution<std::uint32_t>(1, spec.value_max)(rng));
    c.entities.push_back(std::move(e));
  }
  std::vector<std::uint32_t> order(E);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> weight(E);
  for (std::uint32_t r = 0; r < E; ++r) {
    c.entities[order[r]].rank = r + 1;
    weight[order[r]] = std::pow(static_cast<double>(r + 1), -spec.zipf_exponent);
  }
  for (auto& e : c.entities) e.mentions = 1;
  std::discrete_distribution<std::uint32_t> draw(weight.begin(), weight.end());
  for (std::uint64_t m = E; m < spec.total_mentions; ++m) ++c.entities[draw(rng)].mentions;

  for (const auto& e : c.entities)
    for (std::uint64_t m = 0; m < e.mentions; ++m) c.doc_entity.push_back(e.id);
  std::shuffle(c.doc_entity.begin(), c.doc_entity.end(), rng);
  c.docs.reserve(c.doc_entity.size());
  for (auto id : c.doc_entity) c.docs.push_back(make_doc(c.entities[id], topics[c.entities[id].topic], spec, rng));

  std::mt19937_64 hrng(derive_seed(spec.seed, 0x68656c64ull));
  for (std::uint32_t i = 0; i < spec.heldout_docs; ++i) {
    const auto id = c.doc_entity[std::uniform_int_distribution<std::size_t>(0, c.doc_entity.size() - 1)(hrng)];
    c.heldout_entity.push_back(id);
    c.heldout.push_back(make_doc(c.entities[id], topics[c.entities[id].topic], spec, hrng));
  }
  return c;
}

void write_fact_table(const std::string& path, const std::vector<Entity>& entities) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "id\ttopic\trank\tmentions\tname\tattribute\tvalue\taliases\n";
  for (const auto& e : entities) {
    f << e.id << '\t' << e.topic << '\t' << e.rank << '\t' << e.mentions << '\t' << e.name << '\t' << e.attribute
      << '\t' << e.value << '\t';
    for (std::size_t i = 0; i < e.aliases.size(); ++i) f << (i ? "|" : "") << e.aliases[i];
    f << '\n';
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

std::vector<Entity> read_fact_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(f, line);
  std::vector<Entity> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() == 7) cols.emplace_back();
    if (cols.size() != 8) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 columns");
    Entity e;
    try {
      e.id = static_cast<std::uint32_t>(std::stoul(cols[0]));
      e.topic = static_cast<std::uint32_t>(std::stoul(cols[1]));
      e.rank = static_cast<std::uint32_t>(std::stoul(cols[2]));
      e.mentions = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    e.name = cols[4];
    e.attribute = cols[5];
    e.value = cols[6];
    std::stringstream as(cols[7]);
    std::string a;
    while (std::getline(as, a, '|'))
      if (!a.empty()) e.aliases.push_back(a);
    out.push_back(std::move(e));
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& l : lines) f << l << '\n';
  if (!f) throw std::runtime_error("write failed for " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) out.push_back(line);
  return out;
}

std::vector<std::uint32_t> frequency_buckets(const std::vector<Entity>& entities, std::uint32_t n) {
  std::vector<std::uint32_t> order(entities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return entities[a].mentions != entities[b].mentions ? entities[a].mentions < entities[b].mentions
                                                        : entities[a].id < entities[b].id;
  });
  std::vector<std::uint32_t> bucket(entities.size());
  const std::size_t E = entities.size();
  for (std::size_t i = 0; i < E; ++i) bucket[order[i]] = static_cast<std::uint32_t>(i * n / E);
  return bucket;
}

}  // namespace hmem::eval
