#include "hmem/cli/run_config.hpp"

#include <cstdlib>

#include "hmem/common/digest.hpp"
#include "hmem/eval/recall.hpp"

namespace hmem::cli {

namespace {

std::uint64_t section_seed(const IniConfig& ini, const std::string& section, std::uint64_t global, std::uint64_t tag) {
  const auto v = ini.get_int(section, "seed", -1);
  return v >= 0 ? static_cast<std::uint64_t>(v) : derive_seed(global, tag);
}

std::uint32_t u32(const IniConfig& ini, const std::string& s, const std::string& k, std::int64_t fb) {
  const auto v = ini.get_int(s, k, fb);
  if (v < 0 || v > 0xffffffffll) throw ConfigError(s + "." + k, "out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string resolve_out_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("HMEM_OUT_DIR"); env && *env) return env;
  return "run";
}

RunConfig RunConfig::from_ini(IniConfig ini, std::optional<std::uint64_t> seed_override) {
  if (seed_override) ini.set("", "seed", std::to_string(*seed_override));
  RunConfig c;
  const auto seed = ini.get_int("", "seed", 0);
  if (seed < 0) throw ConfigError("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  c.embedder.dim = u32(ini, "embed", "dim", static_cast<std::int64_t>(c.embedder.dim));
  c.embedder.ngram_sizes.clear();
  for (auto n : ini.get_int_list("embed", "ngram_sizes", {3, 4, 5})) {
    if (n <= 0) throw ConfigError("embed.ngram_sizes", "sizes must be positive");
    c.embedder.ngram_sizes.push_back(static_cast<std::size_t>(n));
  }
  c.embedder.hash_seed = static_cast<std::uint64_t>(ini.get_int("embed", "hash_seed", 0));
  c.embedder.validate();

  c.corpus = eval::SyntheticCorpusSpec::from_ini(ini, "corpus");
  c.corpus.seed = section_seed(ini, "corpus", c.seed, 0x636f72);

  c.cluster.depth = u32(ini, "cluster", "depth", c.cluster.depth);
  c.cluster.branching = u32(ini, "cluster", "branching", c.cluster.branching);
  if (c.cluster.depth == 0) throw ConfigError("cluster.depth", "must be positive");
  if (c.cluster.branching == 0) throw ConfigError("cluster.branching", "must be positive");
  c.cluster.train.steps = u32(ini, "cluster", "steps", static_cast<std::int64_t>(c.cluster.train.steps));
  c.cluster.train.batch_per_step = u32(ini, "cluster", "batch_per_step", static_cast<std::int64_t>(c.cluster.train.batch_per_step));
  // the default limit 0.094 is tuned for k = 16; scale it to the configured branching
  c.cluster.train.balance_limit = ini.get_double("cluster", "balance_limit", 0.094 * 16.0 / c.cluster.branching);
  c.cluster.train.seed = section_seed(ini, "cluster", c.seed, 0x636c75);
  c.cluster.train.validate(c.cluster.branching);

  c.anchor = model::AnchorConfig::from_ini(ini, "anchor");
  c.memory = model::MemoryConfig::from_ini(ini, "memory");
  if (c.memory.depth() != c.cluster.depth)
    throw ConfigError("memory.multipliers", "needs one entry per tree level (" + std::to_string(c.cluster.depth) + ")");
  c.anchor_seed = section_seed(ini, "anchor", c.seed, 0x616e63);
  c.bank_seed = section_seed(ini, "memory", c.seed, 0x62616e);

  c.pretrain = train::TrainConfig::from_ini(ini, "pretrain");
  if (!ini.has("pretrain", "regime")) c.pretrain.regime = train::Regime::SCRATCH;
  if (!ini.has("pretrain", "seed")) c.pretrain.seed = derive_seed(c.seed, 0x707265);
  c.train = train::TrainConfig::from_ini(ini, "train");
  if (!ini.has("train", "seed")) c.train.seed = derive_seed(c.seed, 0x747261);
  c.pretrain.validate();
  c.train.validate();

  c.eval.max_new_tokens = u32(ini, "eval", "max_new_tokens", static_cast<std::int64_t>(c.eval.max_new_tokens));
  if (c.eval.max_new_tokens == 0) throw ConfigError("eval.max_new_tokens", "must be positive");
  if (auto m = ini.raw("eval", "modes")) {
    c.eval.modes.clear();
    std::string cur;
    for (char ch : *m + ",") {
      if (ch == ',') {
        if (!cur.empty()) {
          eval::parse_recall_mode(cur);
          c.eval.modes.push_back(cur);
        }
        cur.clear();
      } else if (ch != ' ') {
        cur += ch;
      }
    }
  }
  for (auto n : ini.get_int_list("eval", "block_counts", {})) {
    if (n < 0 || n > c.cluster.branching) throw ConfigError("eval.block_counts", "counts must lie in [0, branching]");
    c.eval.block_counts.push_back(static_cast<std::uint32_t>(n));
  }
  c.eval.perplexity = ini.get_bool("eval", "perplexity", true);

  c.ini = std::move(ini);
  return c;
}

RunConfig RunConfig::load(const std::string& path, std::optional<std::uint64_t> seed_override,
                          std::optional<std::string> out_override) {
  auto ini = IniConfig::from_file(path);
  const auto out = resolve_out_dir(out_override);
  auto c = from_ini(std::move(ini), seed_override);
  c.out_dir = out;  // the output location is not part of the digest
  return c;
}

}  // namespace hmem::cli
