#include "hmem/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hmem/cluster/tree.hpp"
#include "hmem/common/binary_io.hpp"
#include "hmem/common/digest.hpp"
#include "hmem/eval/rag.hpp"
#include "hmem/membank/bank_io.hpp"
#include "hmem/model/checkpoint.hpp"
#include "hmem/tiersim/latency.hpp"
#include "hmem/tiersim/tier_spec.hpp"
#include "hmem/train/tokenizer.hpp"
#include "json.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hmem::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string hex(std::uint64_t v) { return digest_hex(v); }

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

namespace {

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void log_line(const std::string& s) { std::cerr << "[hmem] " << s << std::endl; }

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t config_digest) {
    j_["command"] = std::move(command);
    j_["config_digest"] = hex(config_digest);
    j_["inputs"] = ordered_json::object();
    j_["outputs"] = ordered_json::object();
  }
  void input(const std::string& name, const std::string& path) { add("inputs", name, path); }
  void output(const std::string& name, const std::string& path) { add("outputs", name, path); }
  void write(const std::string& dir) const {
    std::ofstream f(path_in(dir, "manifest.json"), std::ios::trunc);
    f << j_.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
    if (!f) throw std::runtime_error("cannot write manifest in " + dir);
  }

 private:
  void add(const char* group, const std::string& name, const std::string& path) {
    if (path.empty()) return;
    j_[group][name] = {{"path", fs::absolute(path).lexically_normal().string()}, {"digest", hex(file_digest(path))}};
  }
  ordered_json j_;
};

std::string with_commas(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::vector<train::PackedSequence> packed_data(const RunConfig& cfg, const std::vector<std::string>& docs,
                                               const cluster::ClusterTree& tree) {
  std::vector<train::PackDoc> pd;
  pd.reserve(docs.size());
  for (const auto& d : docs) {
    if (d.empty()) continue;
    pd.push_back({train::encode(d), tree.assign(embed::embed_text(d, cfg.embedder))});
  }
  return train::pack_corpus(pd, cfg.anchor.context + 1, derive_seed(cfg.seed, 0x7061636b));
}

void check_tree(const RunConfig& cfg, const cluster::ClusterTree& tree) {
  if (tree.depth() != cfg.cluster.depth || tree.branching() != cfg.cluster.branching)
    throw ConfigError("cluster.depth", "tree file has p=" + std::to_string(tree.depth()) +
                                           " k=" + std::to_string(tree.branching()) + ", config differs");
  if (tree.dim() != cfg.embedder.dim) throw ConfigError("embed.dim", "tree centroid dim differs from the embedder");
}

std::vector<std::string> read_docs(const std::string& path) {
  auto docs = eval::read_lines(path);
  docs.erase(std::remove(docs.begin(), docs.end(), std::string{}), docs.end());
  return docs;
}

}  // namespace

CorpusPaths cmd_gen_corpus(const RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  const auto c = eval::gen_corpus(cfg.corpus);
  CorpusPaths p{path_in(dir, "train.txt"), path_in(dir, "heldout.txt"), path_in(dir, "facts.tsv")};
  eval::write_lines(p.train, c.docs);
  eval::write_lines(p.heldout, c.heldout);
  eval::write_fact_table(p.facts, c.entities);
  Manifest m("gen-corpus", cfg.digest());
  m.output("train", p.train);
  m.output("heldout", p.heldout);
  m.output("facts", p.facts);
  m.write(dir);
  log_line("corpus: " + std::to_string(c.docs.size()) + " documents, " + std::to_string(c.entities.size()) + " entities");
  return p;
}

ClusterPaths cmd_cluster(const RunConfig& cfg, const std::string& corpus, const std::string& dir) {
  fs::create_directories(dir);
  const auto docs = read_docs(corpus);
  if (docs.empty()) throw std::runtime_error("corpus " + corpus + " has no documents");
  std::vector<float> pts;
  pts.reserve(docs.size() * cfg.embedder.dim);
  for (const auto& d : docs) {
    const auto v = embed::embed_text(d, cfg.embedder);
    pts.insert(pts.end(), v.begin(), v.end());
  }
  cluster::TrainLog log;
  auto tree = cluster::train_tree(pts, cfg.embedder.dim, cfg.cluster.depth, cfg.cluster.branching, cfg.cluster.train, &log);
  tree.config_digest = cfg.digest();
  tree.parent_digest = file_digest(corpus);
  ClusterPaths p{path_in(dir, "tree.bin"), path_in(dir, "doc_index.tsv"), path_in(dir, "balance.csv")};
  cluster::save_tree(tree, p.tree);
  {
    std::ofstream f(p.index, std::ios::trunc);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto idx = tree.assign(std::span(pts).subspan(i * cfg.embedder.dim, cfg.embedder.dim));
      for (std::size_t l = 0; l < idx.size(); ++l) f << (l ? " " : "") << idx[l];
      f << "\n";
    }
    if (!f) throw std::runtime_error("cannot write " + p.index);
  }
  {
    std::ofstream f(p.balance, std::ios::trunc);
    f << "level,node,step,batch,splits,max_fraction,max_cumulative\n";
    for (const auto& e : log.events) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%u,%u,%zu,%zu,%zu,%.6f,%.6f\n", e.level, e.node, e.step, e.batch, e.splits,
                    e.max_fraction, e.max_cumulative);
      f << buf;
    }
  }
  Manifest m("cluster", cfg.digest());
  m.input("corpus", corpus);
  m.output("tree", p.tree);
  m.output("index", p.index);
  m.output("balance", p.balance);
  m.write(dir);
  log_line("cluster: tree p=" + std::to_string(tree.depth()) + " k=" + std::to_string(tree.branching()) + " over " +
           std::to_string(docs.size()) + " documents");
  return p;
}

TrainPaths cmd_train(const RunConfig& cfg, Stage stage, const std::string& corpus, const std::string& tree_path,
                     const std::string& init_checkpoint, const std::string& dir, const std::string& resume) {
  fs::create_directories(dir);
  const auto tree = cluster::load_tree(tree_path);
  check_tree(cfg, tree);
  const auto data = packed_data(cfg, read_docs(corpus), tree);
  const bool memory = stage == Stage::MEMORY && !cfg.memory.empty();
  const auto& tc = stage == Stage::ANCHOR ? cfg.pretrain : cfg.train;

  model::TransformerModel<float> net(cfg.anchor, memory ? cfg.memory : model::MemoryConfig{});
  net.init(cfg.anchor_seed);
  if (!init_checkpoint.empty()) {
    const auto init = model::load_model(init_checkpoint);
    if (init.arch().digest() != cfg.anchor.digest())
      throw ConfigError("anchor", "init checkpoint " + init_checkpoint + " has a different architecture");
    net.copy_from(init);
  } else if (tc.regime == train::Regime::FROZEN) {
    throw ConfigError(stage == Stage::ANCHOR ? "pretrain.regime" : "train.regime",
                      "frozen training needs an init checkpoint");
  }
  std::optional<membank::MemoryBank> bank;
  if (memory) {
    bank = membank::init_bank(cfg.memory, cfg.anchor, cfg.cluster.branching, cfg.bank_seed);
    bank->config_digest = cfg.digest();
    bank->parent_digest = file_digest(tree_path);
  }
  log_line(std::string(stage == Stage::ANCHOR ? "pretrain" : "train") + ": " + std::to_string(data.size()) +
           " sequences, " + std::to_string(tc.total_steps) + " steps of " + std::to_string(tc.batch_size));
  const auto t0 = std::chrono::steady_clock::now();
  const auto every = std::max<std::uint64_t>(1, tc.total_steps / 20);
  const auto run = train::train_run(net, bank ? &*bank : nullptr, tc, data, dir, resume, cfg.digest(),
                                    [&](const train::StepMetrics& m) {
                                      if (m.step % every && m.step != tc.total_steps) return;
                                      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                                      char buf[200];
                                      std::snprintf(buf, sizeof buf, "step %llu lr %.2e loss %.4f fetched %.4f generic %.4f (%.0fs)",
                                                    static_cast<unsigned long long>(m.step), m.lr, m.loss,
                                                    m.loss_fetched, m.loss_generic, dt);
                                      log_line(buf);
                                    });
  if (!run.metrics.empty() && run.metrics.back().aborted)
    throw std::runtime_error("training aborted at step " + std::to_string(run.metrics.back().step) +
                             ": non-finite loss or gradient");

  TrainPaths p;
  p.metrics = path_in(dir, "metrics.csv");
  p.checkpoint = path_in(dir, stage == Stage::ANCHOR ? "anchor.ckpt" : "model.ckpt");
  model::CheckpointHeader h;
  h.arch = net.arch();
  h.mem = net.memory_config();
  h.step = tc.total_steps;
  h.config_digest = cfg.digest();
  h.parent_digest = file_digest(init_checkpoint.empty() ? tree_path : init_checkpoint);
  model::save_model(p.checkpoint, net, h);
  Manifest m(stage == Stage::ANCHOR ? "train-anchor" : "train-memory", cfg.digest());
  m.input("corpus", corpus);
  m.input("tree", tree_path);
  m.input("init", init_checkpoint);
  m.output("checkpoint", p.checkpoint);
  if (bank) {
    p.bank = path_in(dir, "bank.bin");
    membank::save_bank(*bank, p.bank);
    m.output("bank", p.bank);
  }
  m.output("metrics", p.metrics);
  m.write(dir);
  return p;
}

namespace {

eval::EvalReport run_eval(const RunConfig& cfg, const EvalInputs& in, const std::vector<std::string>& modes,
                          const std::vector<std::uint32_t>* blocked, bool sweep, const std::string& dir,
                          const std::string& command) {
  fs::create_directories(dir);
  const auto net = model::load_model(in.checkpoint);
  std::optional<membank::MemoryBank> bank;
  if (!in.bank.empty()) bank = membank::load_bank(in.bank, std::nullopt, &net.arch());
  const auto tree = cluster::load_tree(in.tree);
  check_tree(cfg, tree);
  const auto facts = eval::read_fact_table(in.facts);

  eval::EvalSetup setup;
  setup.model = &net;
  setup.bank = bank ? &*bank : nullptr;
  setup.tree = &tree;
  setup.embedder = cfg.embedder;
  setup.max_new_tokens = cfg.eval.max_new_tokens;

  membank::BlockMask mask(tree.branching());
  if (blocked)
    for (auto id : *blocked) {
      if (id == 0 || id > tree.branching()) throw std::invalid_argument("subtree id " + std::to_string(id) + " out of range");
      mask.block_subtree(id);
    }

  eval::EvalReport rep;
  rep.config_digest = cfg.digest();
  std::optional<eval::RagStore> rag;
  for (const auto& name : modes) {
    const auto mode = eval::parse_recall_mode(name);
    const bool memory_mode = mode != eval::RecallMode::NONE && mode != eval::RecallMode::RAG;
    if (memory_mode && !bank) {
      log_line("skipping mode " + name + ": no memory bank");
      continue;
    }
    if (mode == eval::RecallMode::RAG && !rag) rag.emplace(read_docs(in.train_docs), tree, cfg.embedder);
    rep.recall.push_back(eval::fact_recall(facts, eval::model_answerer(setup, mode, &mask, rag ? &*rag : nullptr), mode));
    log_line("recall " + name + ": " + std::to_string(rep.recall.back().accuracy));
    if (mode == eval::RecallMode::RAG) {
      const auto& res = rep.recall.back();
      for (std::size_t i = 0; i < facts.size(); ++i) {
        const auto hit = rag->retrieve(res.queries[i].prompt);
        ++rep.rag.queries;
        if (rag->doc(hit.doc).find(eval::fact_sentence(facts[i])) != std::string::npos) {
          ++rep.rag.hits;
          rep.rag.correct_on_hit += res.queries[i].correct;
        }
      }
    }
  }
  if (cfg.eval.perplexity && !in.heldout.empty()) {
    const auto docs = read_docs(in.heldout);
    std::vector<eval::RecallMode> pm{eval::RecallMode::NONE};
    if (bank) pm.insert(pm.end(), {eval::RecallMode::GENERIC, eval::RecallMode::FETCHED});
    if (bank && blocked) pm.push_back(eval::RecallMode::FETCHED_MASK);
    for (auto m : pm) rep.perplexity[eval::to_string(m)] = eval::perplexity(docs, setup, m, &mask);
  }
  if (sweep && bank && !cfg.eval.block_counts.empty())
    rep.blocking = eval::blocking_sweep(facts, setup, cfg.eval.block_counts);

  const auto csv = path_in(dir, "report.csv"), jsonl = path_in(dir, "trace.jsonl");
  eval::write_report(rep, csv, jsonl);
  Manifest m(command, cfg.digest());
  m.input("checkpoint", in.checkpoint);
  m.input("bank", in.bank);
  m.input("tree", in.tree);
  m.input("facts", in.facts);
  m.output("report", csv);
  m.output("trace", jsonl);
  m.write(dir);
  return rep;
}

}  // namespace

eval::EvalReport cmd_eval(const RunConfig& cfg, const EvalInputs& in, const std::string& dir) {
  return run_eval(cfg, in, cfg.eval.modes, nullptr, true, dir, "eval");
}

eval::EvalReport cmd_block(const RunConfig& cfg, const EvalInputs& in, const std::vector<std::uint32_t>& subtrees,
                           const std::string& dir) {
  if (in.bank.empty()) throw std::invalid_argument("block needs a memory bank");
  return run_eval(cfg, in, {"fetched", "fetched_mask"}, &subtrees, false, dir, "block");
}

std::string cmd_simulate(const RunConfig& cfg, const std::string& tier_spec, const std::string& dir) {
  if (cfg.memory.empty()) throw ConfigError("memory.multipliers", "simulate needs a memory configuration");
  const auto spec = tiersim::load_tier_spec(tier_spec, cfg.memory.depth());
  const auto acc = membank::bank_accounting(cfg.memory, cfg.anchor, cfg.cluster.branching, cfg.memory.depth());
  const auto& pl = spec.placement;
  std::ostringstream o;
  char buf[256];
  o << "row,level,params,tier,seconds\n";
  for (std::size_t l = 0; l < acc.level_sizes.size(); ++l) {
    const auto& t = pl.level_tier[l] ? pl.tiers[*pl.level_tier[l]] : pl.slowest();
    std::snprintf(buf, sizeof buf, "level,%zu,%llu,%s,%.9g\n", l + 1, static_cast<unsigned long long>(acc.level_sizes[l]),
                  t.name.c_str(), tiersim::level_cost(acc.level_sizes[l], t, pl.bytes_per_param));
    o << buf;
  }
  const double hier = tiersim::load_latency(acc.level_sizes, pl, spec.aggregation);
  const double flat = tiersim::flat_latency(acc.level_sizes, pl);
  const auto session = tiersim::zipf_session(1000, cfg.memory.depth(), cfg.cluster.branching, 1.1, derive_seed(cfg.seed, 0x73696d));
  const auto swap = tiersim::session_latency(session, acc.level_sizes, pl, spec.aggregation);
  const auto full = tiersim::full_reload_latency(session, acc.level_sizes, pl, spec.aggregation);
  const auto mean = [](const std::vector<double>& v) {
    return v.size() > 1 ? std::accumulate(v.begin() + 1, v.end(), 0.0) / static_cast<double>(v.size() - 1) : 0.0;
  };
  std::snprintf(buf, sizeof buf, "hierarchical,,%llu,,%.9g\nflat,,%llu,%s,%.9g\nsession_swap_mean,,,,%.9g\nsession_reload_mean,,,,%.9g\n",
                static_cast<unsigned long long>(acc.fetch_size), hier, static_cast<unsigned long long>(acc.fetch_size),
                pl.slowest().name.c_str(), flat, mean(swap), mean(full));
  o << buf;
  fs::create_directories(dir);
  std::ofstream f(path_in(dir, "latency.csv"), std::ios::trunc);
  f << o.str();
  if (!f) throw std::runtime_error("cannot write latency.csv in " + dir);
  return o.str();
}

std::string cmd_init_bank(const RunConfig& cfg, const std::string& path, bool header_only) {
  if (cfg.memory.empty()) throw ConfigError("memory.multipliers", "init-bank needs a memory configuration");
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  membank::MemoryBank bank = header_only ? membank::MemoryBank(cfg.anchor, cfg.memory, cfg.cluster.branching, false)
                                         : membank::init_bank(cfg.memory, cfg.anchor, cfg.cluster.branching, cfg.bank_seed);
  bank.config_digest = cfg.digest();
  if (header_only)
    membank::save_bank(bank, path, std::vector<std::uint32_t>{});
  else
    membank::save_bank(bank, path);
  return path;
}

std::string cmd_inspect(const std::string& path, const std::string& parent) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4] = {};
  f.read(magic, 4);
  f.close();
  const std::string mg(magic, 4);
  std::ostringstream o;
  std::uint64_t config_digest = 0, parent_digest = 0;
  auto anchor_line = [&](const model::AnchorConfig& a) {
    o << "anchor: layers " << a.layers << ", d " << a.d << ", heads " << a.heads << ", head_dim " << a.head_dim
      << ", ffn " << a.ffn_dim << ", vocab " << a.vocab << ", context " << a.context << (a.tied_head ? ", tied" : ", untied")
      << " head, params " << with_commas(a.count_params()) << "\n";
  };
  auto memory_line = [&](const model::MemoryConfig& m) {
    o << "memory: ";
    if (m.empty()) {
      o << "none\n";
      return;
    }
    o << model::to_string(m.type) << " (";
    for (std::size_t i = 0; i < m.multipliers.size(); ++i) o << (i ? "," : "") << m.multipliers[i];
    o << "), placement " << model::to_string(m.placement) << "\n";
  };
  if (mg == "HMCT") {
    const auto t = cluster::load_tree(path);
    o << "cluster tree: p " << t.depth() << ", k " << t.branching() << ", dim " << t.dim() << "\n";
    for (std::uint32_t l = 1; l <= t.depth(); ++l) {
      o << "level " << l << " counts:";
      for (auto c : t.level_counts(l)) o << " " << c;
      o << "\n";
    }
    config_digest = t.config_digest;
    parent_digest = t.parent_digest;
  } else if (mg == "HMCK") {
    const auto h = model::read_model_header(path);
    o << "checkpoint: step " << h.step << "\n";
    anchor_line(h.arch);
    memory_line(h.mem);
    config_digest = h.config_digest;
    parent_digest = h.parent_digest;
  } else if (mg == "HMBK") {
    const auto info = membank::read_bank_info(path);
    anchor_line(info.arch);
    memory_line(info.cfg);
    const auto acc = membank::bank_accounting(info.cfg, info.arch, info.k, info.cfg.depth());
    o << "bank: k " << info.k << ", depth " << info.cfg.depth();
    if (info.shard) o << ", shard " << info.shard;
    o << "\n";
    for (std::size_t l = 0; l < acc.level_sizes.size(); ++l)
      o << "level " << l + 1 << ": block " << with_commas(acc.level_sizes[l]) << ", stored "
        << (info.levels_present[l] ? "yes" : "no") << "\n";
    o << "fetch " << with_commas(acc.fetch_size) << " / bank " << with_commas(acc.bank_size) << "\n";
    config_digest = info.config_digest;
    parent_digest = info.parent_digest;
  } else if (mg == "HMTS") {
    std::ifstream s(path, std::ios::binary);
    BinaryReader r(s, "training state");
    r.skip(4);
    if (r.get<std::uint32_t>() != 1) throw FormatError("training state: unsupported version");
    const auto step = r.get<std::uint64_t>();
    const auto tdig = r.get<std::uint64_t>();
    model::CheckpointHeader h;
    (void)model::read_model(s, &h);
    o << "training state: step " << step << ", train config " << hex(tdig) << "\n";
    anchor_line(h.arch);
    memory_line(h.mem);
    config_digest = h.config_digest;
  } else if (mg[0] == '{') {
    std::ifstream s(path);
    const auto j = nlohmann::json::parse(s);
    o << "manifest: " << j.at("command").get<std::string>() << ", config " << j.at("config_digest").get<std::string>() << "\n";
    std::string failed;
    for (const char* group : {"inputs", "outputs"})
      for (const auto& [name, e] : j.at(group).items()) {
        const auto p = e.at("path").get<std::string>();
        const auto want = e.at("digest").get<std::string>();
        std::string got = fs::exists(p) ? hex(file_digest(p)) : "missing";
        const bool ok = got == want;
        o << group << " " << name << ": " << want << (ok ? " ok" : " MISMATCH (" + got + ")") << "\n";
        if (!ok) failed += " " + name;
      }
    if (!failed.empty()) throw std::runtime_error(o.str() + "digest chain broken:" + failed);
    return o.str();
  } else {
    throw std::runtime_error(path + ": unrecognized artifact");
  }
  o << "config digest " << hex(config_digest) << ", parent digest " << hex(parent_digest) << "\n";
  if (!parent.empty()) {
    const auto d = file_digest(parent);
    if (d != parent_digest)
      throw std::runtime_error(o.str() + "parent " + parent + " has digest " + hex(d) + ", expected " + hex(parent_digest));
    o << "parent " << parent << ": ok\n";
  }
  return o.str();
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult r;
  const auto& out = cfg.out_dir;
  r.corpus = cmd_gen_corpus(cfg, path_in(out, "corpus"));
  r.cluster = cmd_cluster(cfg, r.corpus.train, path_in(out, "cluster"));
  r.anchor = cmd_train(cfg, Stage::ANCHOR, r.corpus.train, r.cluster.tree, "", path_in(out, "anchor"));
  r.memory = cmd_train(cfg, Stage::MEMORY, r.corpus.train, r.cluster.tree, r.anchor.checkpoint, path_in(out, "memory"));
  EvalInputs in{r.memory.checkpoint, r.memory.bank, r.cluster.tree, r.corpus.facts, r.corpus.train, r.corpus.heldout};
  r.report = cmd_eval(cfg, in, path_in(out, "eval"));
  r.report_csv = path_in(path_in(out, "eval"), "report.csv");
  return r;
}

}  // namespace hmem::cli
