#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hmem {
class IniConfig;
}

namespace hmem::eval {

struct SyntheticCorpusSpec {
  std::uint32_t num_topics = 16;
  std::uint32_t entities_per_topic = 64;
  double zipf_exponent = 1.1;
  /// Total fact mentions (one document each); every entity gets at least one.
  std::uint64_t total_mentions = 20000;
  /// Filler sentences per document; the fact sentence takes a random slot among them.
  std::uint32_t filler_sentences = 1;
  /// Babble words per filler sentence are drawn from [min_words, max_words].
  std::uint32_t min_words = 3;
  std::uint32_t max_words = 7;
  std::uint32_t words_per_topic = 48;
  std::uint32_t value_max = 999;
  /// Held-out documents for perplexity; they restate known facts with fresh filler.
  std::uint32_t heldout_docs = 256;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t digest() const;
  static SyntheticCorpusSpec from_ini(const IniConfig& ini, const std::string& section = "corpus");
};

struct Entity {
  std::uint32_t id = 0;     // 0-based
  std::uint32_t topic = 0;  // 0-based
  std::uint32_t rank = 0;   // 1 = most frequent under the Zipf law
  std::string name;
  std::string attribute;
  std::string value;
  std::vector<std::string> aliases;  // accepted alternative answers
  std::uint64_t mentions = 0;
};

struct Corpus {
  std::vector<Entity> entities;
  std::vector<std::string> docs;
  std::vector<std::uint32_t> doc_entity;
  std::vector<std::string> heldout;
  std::vector<std::uint32_t> heldout_entity;
};

/// Topic-specific syllables build entity names, attribute words and a Markov babble
/// vocabulary, so documents of one topic share character n-grams. Ranks are a random
/// permutation of entities; mentions are 1 + a multinomial draw of the remaining
/// total_mentions - entities with weights rank^-zipf_exponent.
Corpus gen_corpus(const SyntheticCorpusSpec& spec);

/// "The <attribute> of <name> is"
std::string fact_prompt(const Entity& e);
/// "The <attribute> of <name> is <value>."
std::string fact_sentence(const Entity& e);

/// Tab-separated: id, topic, rank, mentions, name, attribute, value, aliases (|-joined).
void write_fact_table(const std::string& path, const std::vector<Entity>& entities);
std::vector<Entity> read_fact_table(const std::string& path);

/// One document per line; embedded newlines are not produced by the generator.
void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::string& path);

/// Frequency buckets: entities sorted by (mentions, id) ascending and cut into `n` groups
/// of near-equal size; bucket 0 is the rarest. Returns the bucket of every entity id.
std::vector<std::uint32_t> frequency_buckets(const std::vector<Entity>& entities, std::uint32_t n = 5);

}  // namespace hmem::eval
