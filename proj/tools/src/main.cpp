#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hmem/cli/commands.hpp"
#include "hmem/common/binary_io.hpp"
#include "hmem/common/ini.hpp"

using namespace hmem;

int main(int argc, char** argv) {
  CLI::App app{"hmem: pretraining with hierarchical memory banks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto common = [&](CLI::App* sc, bool needs_config = true) {
    auto* o = sc->add_option("--config", config_path, "INI run configuration");
    if (needs_config) o->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", seed, "Global seed (overrides the config)");
    sc->add_option("--out", out, "Output directory (default: $HMEM_OUT_DIR or ./run)");
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic long-tail corpus and fact table");
  common(gen);

  std::string corpus, tree, init, resume, stage = "memory";
  auto* clu = app.add_subcommand("cluster", "Train the hierarchical clustering tree on a corpus");
  common(clu);
  clu->add_option("corpus", corpus, "Corpus file, one document per line")->required()->check(CLI::ExistingFile);

  auto* trn = app.add_subcommand("train", "Train the anchor or the memory bank");
  common(trn);
  trn->add_option("corpus", corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  trn->add_option("tree", tree, "Cluster tree file")->required()->check(CLI::ExistingFile);
  trn->add_option("init", init, "Initial checkpoint")->check(CLI::ExistingFile);
  trn->add_option("--stage", stage, "anchor or memory")->check(CLI::IsMember({"anchor", "memory"}));
  trn->add_option("--resume", resume, "Training state to continue from")->check(CLI::ExistingFile);

  cli::EvalInputs in;
  std::string corpus_dir;
  auto eval_args = [&](CLI::App* sc) {
    sc->add_option("checkpoint", in.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sc->add_option("bank", in.bank, "Memory bank")->required()->check(CLI::ExistingFile);
    sc->add_option("tree", in.tree, "Cluster tree")->required()->check(CLI::ExistingFile);
    sc->add_option("corpus_dir", corpus_dir, "Directory with facts.tsv, train.txt, heldout.txt")
        ->required()
        ->check(CLI::ExistingDirectory);
  };
  auto* ev = app.add_subcommand("eval", "Fact recall, perplexity and blocking sweep");
  common(ev);
  eval_args(ev);

  std::vector<std::uint32_t> subtrees;
  auto* blk = app.add_subcommand("block", "Evaluate with level-1 subtrees blocked");
  common(blk);
  eval_args(blk);
  blk->add_option("--subtrees", subtrees, "Level-1 subtree ids to block")->required()->delimiter(',');

  std::string tiers;
  auto* sim = app.add_subcommand("simulate", "Memory load latency under a storage tier spec");
  common(sim);
  sim->add_option("tiers", tiers, "Tier spec INI")->required()->check(CLI::ExistingFile);

  std::string bank_path;
  bool header_only = false;
  auto* ib = app.add_subcommand("init-bank", "Write an initialized (or header-only) memory bank");
  common(ib);
  ib->add_option("path", bank_path, "Output bank file")->required();
  ib->add_flag("--header-only", header_only, "Write the configuration only");

  std::string artifact, parent;
  auto* ins = app.add_subcommand("inspect", "Summarize an artifact and verify its digests");
  ins->add_option("artifact", artifact, "Artifact file or manifest.json")->required()->check(CLI::ExistingFile);
  ins->add_option("--parent", parent, "Parent artifact to check against the recorded digest")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  cli::tune_allocator();

  try {
    if (ins->parsed()) {
      std::cout << cli::cmd_inspect(artifact, parent);
      return 0;
    }
    const auto cfg = cli::RunConfig::load(config_path, seed, out);
    const auto dir = cfg.out_dir;
    if (gen->parsed()) {
      const auto p = cli::cmd_gen_corpus(cfg, dir);
      std::cout << p.train << "\n" << p.heldout << "\n" << p.facts << "\n";
    } else if (clu->parsed()) {
      const auto p = cli::cmd_cluster(cfg, corpus, dir);
      std::cout << p.tree << "\n" << p.index << "\n";
    } else if (trn->parsed()) {
      const auto p = cli::cmd_train(cfg, stage == "anchor" ? cli::Stage::ANCHOR : cli::Stage::MEMORY, corpus, tree,
                                    init, dir, resume);
      std::cout << p.checkpoint << "\n";
      if (!p.bank.empty()) std::cout << p.bank << "\n";
    } else if (ev->parsed() || blk->parsed()) {
      in.facts = corpus_dir + "/facts.tsv";
      in.train_docs = corpus_dir + "/train.txt";
      in.heldout = corpus_dir + "/heldout.txt";
      const auto rep = ev->parsed() ? cli::cmd_eval(cfg, in, dir) : cli::cmd_block(cfg, in, subtrees, dir);
      std::cout << eval::report_csv(rep);
    } else if (sim->parsed()) {
      std::cout << cli::cmd_simulate(cfg, tiers, dir);
    } else if (ib->parsed()) {
      std::cout << cli::cmd_init_bank(cfg, bank_path, header_only) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
