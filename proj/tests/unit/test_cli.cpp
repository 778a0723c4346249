#include <chrono>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hmem/cli/commands.hpp"
#include "hmem/cli/run_config.hpp"
#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"

using namespace hmem::cli;
namespace fs = std::filesystem;

namespace {

RunConfig toy(const std::string& out) {
  return RunConfig::load(testutil::config_file("toy.ini"), std::nullopt, out);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("invalid configs name the field") {
    auto ini = hmem::IniConfig::from_file(testutil::config_file("toy.ini"));
    ini.set("anchor", "heads", "0");
    CHECK_THROWS_WITH_AS(RunConfig::from_ini(ini), doctest::Contains("anchor.heads"), hmem::ConfigError);
    auto ini2 = hmem::IniConfig::from_file(testutil::config_file("toy.ini"));
    ini2.set("memory", "multipliers", "4,2,1");
    CHECK_THROWS_AS(RunConfig::from_ini(ini2), hmem::ConfigError);
    auto ini3 = hmem::IniConfig::from_file(testutil::config_file("toy.ini"));
    ini3.set("eval", "modes", "none,telepathy");
    CHECK_THROWS_WITH_AS(RunConfig::from_ini(ini3), doctest::Contains("eval.modes"), hmem::ConfigError);
  }

  TEST_CASE("seed override changes the digest, key order does not") {
    const auto a = toy("x");
    const auto b = RunConfig::load(testutil::config_file("toy.ini"), 99, "y");
    CHECK(a.digest() != b.digest());
    CHECK(a.digest() == toy("z").digest());
    const auto p = hmem::IniConfig::from_string("[s]\na = 1\nb = 2\n");
    const auto q = hmem::IniConfig::from_string("[s]\nb = 2\na = 1\n");
    CHECK(p.digest() == q.digest());
  }

  TEST_CASE("output directory resolution") {
    CHECK(resolve_out_dir(std::string("flag")) == "flag");
  }

  TEST_CASE("inspect prints the published accounting for a header-only bank") {
    auto ini = hmem::IniConfig::from_file(testutil::config_file("toy.ini"));
    ini.set("anchor", "layers", "12");
    ini.set("anchor", "d", "1024");
    ini.set("anchor", "heads", "16");
    ini.set("anchor", "head_dim", "64");
    ini.set("anchor", "ffn_dim", "2816");
    ini.set("cluster", "depth", "4");
    ini.set("cluster", "branching", "16");
    ini.set("memory", "multipliers", "3840,336,6,0");
    const auto cfg = RunConfig::from_ini(ini);
    const auto dir = testutil::scratch_dir("inspect");
    cmd_init_bank(cfg, dir + "/bank.bin", true);
    const auto text = cmd_inspect(dir + "/bank.bin");
    CHECK(text.find("fetch 154,165,248 / bank 6,341,787,648") != std::string::npos);
  }

  TEST_CASE("k = 1 clustering gives a trivial tree and all-ones indices") {
    auto ini = hmem::IniConfig::from_file(testutil::config_file("toy.ini"));
    ini.set("cluster", "branching", "1");
    ini.set("cluster", "balance_limit", "1");
    ini.set("eval", "block_counts", "0,1");
    const auto dir = testutil::scratch_dir("k1");
    const auto cfg = RunConfig::from_ini(ini);
    const auto corpus = cmd_gen_corpus(cfg, dir + "/corpus");
    const auto cl = cmd_cluster(cfg, corpus.train, dir + "/cluster");
    std::ifstream f(cl.index);
    std::string line;
    std::size_t n = 0;
    while (std::getline(f, line)) {
      CHECK(line == "1 1");
      ++n;
    }
    CHECK(n == 600);
  }

  TEST_CASE("commands reproduce identical artifacts and manifests verify") {
    const auto cfg = toy("unused");
    const auto d1 = testutil::scratch_dir("repro_a"), d2 = testutil::scratch_dir("repro_b");
    const auto c1 = cmd_gen_corpus(cfg, d1 + "/corpus");
    const auto c2 = cmd_gen_corpus(cfg, d2 + "/corpus");
    CHECK(hmem::file_digest(c1.train) == hmem::file_digest(c2.train));
    CHECK(hmem::file_digest(c1.facts) == hmem::file_digest(c2.facts));
    const auto t1 = cmd_cluster(cfg, c1.train, d1 + "/cluster");
    const auto t2 = cmd_cluster(cfg, c2.train, d2 + "/cluster");
    CHECK(hmem::file_digest(t1.tree) == hmem::file_digest(t2.tree));

    CHECK_NOTHROW(cmd_inspect(d1 + "/corpus/manifest.json"));
    CHECK_NOTHROW(cmd_inspect(t1.tree, c1.train));
    CHECK_THROWS(cmd_inspect(t1.tree, c1.facts));
    const auto text = cmd_inspect(t1.tree);
    CHECK(text.find(hex(cfg.digest())) != std::string::npos);

    std::ofstream(c1.facts, std::ios::app) << "tampered\n";
    CHECK_THROWS(cmd_inspect(d1 + "/corpus/manifest.json"));
  }

  TEST_CASE("end-to-end toy pipeline") {
    auto cfg = toy(testutil::scratch_dir("pipeline"));
    const auto start = std::chrono::steady_clock::now();
    const auto res = run_pipeline(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 300);
    CHECK(fs::exists(res.memory.checkpoint));
    CHECK(fs::exists(res.memory.bank));
    CHECK(res.report.recall.size() == 4);
    CHECK(slurp(res.report_csv).find("recall,fetched,bucket0") != std::string::npos);
    CHECK(fs::exists(cfg.out_dir + "/eval/trace.jsonl"));
    CHECK_NOTHROW(cmd_inspect(res.memory.checkpoint, res.anchor.checkpoint));

    const auto tiers = cfg.out_dir + "/tiers.ini";
    std::ofstream(tiers) << "[tier:ram]\nbandwidth = 2e10\n[tier:disk]\nbandwidth = 2e8\nfixed_latency = 0.001\n"
                            "[placement]\nlevel1 = ram\nlevel2 = disk\n";
    const auto csv = cmd_simulate(cfg, tiers, cfg.out_dir + "/sim");
    CHECK(csv.find("hierarchical") != std::string::npos);
    CHECK(slurp(cfg.out_dir + "/sim/latency.csv") == csv);
  }
}
