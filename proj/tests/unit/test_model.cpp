#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hmem/common/binary_io.hpp"
#include "hmem/common/ini.hpp"
#include "hmem/model/checkpoint.hpp"
#include "hmem/model/config.hpp"
#include "hmem/model/layout.hpp"
#include "hmem/model/transformer.hpp"
#include "hmem/numcore/ops.hpp"

using namespace hmem::model;
using hmem::numcore::Tape;
using hmem::numcore::Tensor;

namespace {

constexpr MemType kTypes[] = {MemType::FFN, MemType::LORA_QK, MemType::LORA_OV, MemType::LORA_FFN, MemType::KV};

AnchorConfig tiny_arch() {
  AnchorConfig a;
  a.layers = 2, a.d = 8, a.heads = 2, a.head_dim = 4, a.ffn_dim = 12, a.vocab = 11, a.context = 32;
  return a;
}

MemoryConfig mem_of(MemType t, std::vector<std::uint32_t> r, Placement p = Placement::UNIFORM) {
  MemoryConfig m;
  m.multipliers = std::move(r);
  m.type = t;
  m.placement = p;
  return m;
}

/// Model with anchor values scaled up from the 0.02 init so every term moves the logits.
TransformerModel<double> random_model(AnchorConfig a, MemoryConfig m, std::uint64_t seed) {
  TransformerModel<double> model(a, std::move(m));
  std::mt19937_64 rng(seed);
  for (auto& p : model.params()) {
    auto v = p.value.data();
    if (p.value.rank() == 1)
      for (auto& x : v) x = 1.0 + std::normal_distribution<double>(0, 0.1)(rng);
    else
      for (auto& x : v) x = std::normal_distribution<double>(0, 0.3)(rng);
  }
  return model;
}

std::vector<std::uint32_t> random_tokens(std::size_t n, std::uint32_t V, std::mt19937_64& rng) {
  std::vector<std::uint32_t> t(n);
  for (auto& x : t) x = std::uniform_int_distribution<std::uint32_t>(0, V - 1)(rng);
  return t;
}

std::map<std::string, std::vector<double>> read_fixture(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    double v;
    while (is >> v) out[key].push_back(v);
  }
  return out;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("published anchor counts") {
    AnchorConfig a1;
    a1.layers = 35, a1.d = 512, a1.heads = 12, a1.head_dim = 32, a1.ffn_dim = 2048, a1.vocab = 50432;
    a1.tied_head = true, a1.qk_norm = true;
    CHECK(a1.count_params() == 163510016ull);
    AnchorConfig a2;
    a2.layers = 24, a2.d = 1024, a2.heads = 16, a2.head_dim = 64, a2.ffn_dim = 2816, a2.vocab = 50432;
    a2.tied_head = false;
    CHECK(a2.count_params() == 411665408ull);
    AnchorConfig a3 = a2;
    a3.d = 2048, a3.head_dim = 128, a3.ffn_dim = 5632;
    CHECK(a3.count_params() == 1439893504ull);
    a3.tied_head = true;
    CHECK(a3.count_params() == 1439893504ull - 50432ull * 2048);
  }

  TEST_CASE("closed-form count equals the tensor walk") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      AnchorConfig a;
      auto u = [&](int lo, int hi) { return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng); };
      a.layers = u(1, 4), a.d = u(2, 12), a.heads = u(1, 3), a.head_dim = 2 * u(1, 3), a.ffn_dim = u(2, 20);
      a.vocab = u(3, 30), a.tied_head = u(0, 1), a.qk_norm = u(0, 1);
      TransformerModel<float> m(a, {});
      CHECK(m.enumerate_params() == a.count_params());
    }
  }

  TEST_CASE("layer subsets") {
    CHECK(layer_subset(Placement::UNIFORM, 4) == std::vector<std::uint32_t>{0, 1, 2, 3});
    std::vector<std::uint32_t> late;
    for (std::uint32_t i = 25; i < 35; ++i) late.push_back(i);
    CHECK(layer_subset(Placement::LATE, 35) == late);
    CHECK(layer_subset(Placement::EARLY, 35).size() == 10);
    CHECK(layer_subset(Placement::MID, 35).front() == 12);
    // ceil(5 * 10 / 35) = 2 layers starting at floor((5 - 2) / 2)
    CHECK(layer_subset(Placement::MID, 5) == std::vector<std::uint32_t>{1, 2});
  }

  TEST_CASE("block sizes") {
    AnchorConfig a;
    a.layers = 12, a.d = 1024, a.heads = 16, a.head_dim = 64, a.ffn_dim = 2816;
    CHECK(block_size(a, MemType::FFN, Placement::UNIFORM, 4182) == 154165248ull);
    for (auto t : kTypes) CHECK(block_size(a, t, Placement::UNIFORM, 0) == 0);
    AnchorConfig kv;
    kv.layers = 1, kv.d = 2, kv.heads = 1, kv.head_dim = 4, kv.ffn_dim = 2;
    CHECK(block_size(kv, MemType::KV, Placement::UNIFORM, 1) == 8);
  }

  TEST_CASE("formulas equal enumerated attachment sizes") {
    std::mt19937_64 rng(8);
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng); };
    for (int i = 0; i < 20; ++i) {
      AnchorConfig a;
      a.layers = u(1, 6), a.d = u(2, 16), a.heads = u(1, 4), a.head_dim = 2 * u(1, 4), a.ffn_dim = u(2, 24);
      const auto type = kTypes[u(0, 4)];
      const auto place = static_cast<Placement>(u(0, 3));
      const std::vector<std::uint32_t> r{u(0, 5), u(0, 5), u(0, 3)};
      const auto m = mem_of(type, r, place);
      const auto layout = MemorySlotLayout::build(a, m);
      std::size_t fetch = 0;
      for (std::size_t lv = 0; lv < 3; ++lv) {
        std::size_t walked = 0, expect_offset = 0;
        for (const auto& s : layout.levels[lv].slots) {
          CHECK(s.offset == expect_offset);
          expect_offset += s.size();
          walked += s.size();
        }
        CHECK(walked == block_size(a, type, place, r[lv]));
        CHECK(layout.levels[lv].size == walked);
        fetch += walked;
      }
      CHECK(layout.fetch_size == fetch);
    }
  }

  TEST_CASE("logits match the straight-line reference fixture") {
    auto fx = read_fixture(testutil::fixture("forward_d2.txt"));
    AnchorConfig a;
    a.layers = 1, a.d = 2, a.heads = 1, a.head_dim = 2, a.ffn_dim = 2, a.vocab = 4, a.rope_base = 10000;
    a.context = 8;
    TransformerModel<double> m(a, {});
    const char* order[] = {"tok_emb", "attn_norm", "wq", "wk", "wv", "wo", "q_norm",
                           "k_norm", "ffn_norm", "w1", "w2", "w3", "final_norm"};
    for (std::size_t i = 0; i < std::size(order); ++i) m.params()[i].value.storage() = fx.at(order[i]);
    std::vector<std::uint32_t> tokens;
    for (double t : fx.at("tokens")) tokens.push_back(static_cast<std::uint32_t>(t));
    const auto logits = m.logits(tokens);
    CHECK(testutil::max_abs_diff(logits.storage(), fx.at("logits")) <= 1e-12);
  }

  TEST_CASE("forward matches the reference evaluator for every memory type") {
    for (auto type : kTypes) {
      for (bool tied : {true, false}) {
        auto a = tiny_arch();
        a.tied_head = tied;
        auto m = random_model(a, mem_of(type, {2, 0, 3}), 31);
        std::mt19937_64 rng(5);
        const auto blocks = testutil::random_blocks(m, rng, 0.3);
        const auto binding = testutil::bind(blocks);
        const auto tokens = random_tokens(9, a.vocab, rng);
        const std::vector<std::uint32_t> docs{0, 0, 0, 0, 1, 1, 1, 2, 2};
        const auto ours = m.logits(tokens, docs, &binding);
        const auto ref = refcheck::oracle_forward(tokens, testutil::to_oracle(m, &blocks), docs);
        INFO(to_string(type) << " tied=" << tied);
        CHECK(testutil::max_abs_diff(ours.storage(), ref.value) <= 1e-10);
      }
    }
  }

  TEST_CASE("no memory equals the plain anchor bit for bit") {
    auto a = tiny_arch();
    auto with = random_model(a, mem_of(MemType::LORA_FFN, {3, 1}), 2);
    TransformerModel<double> plain(a, {});
    plain.copy_from(with);
    std::mt19937_64 rng(1);
    const auto tokens = random_tokens(10, a.vocab, rng);
    CHECK(with.logits(tokens).storage() == plain.logits(tokens).storage());
  }

  TEST_CASE("identical memory gives identical logits, different memory differs") {
    auto a = tiny_arch();
    auto m = random_model(a, mem_of(MemType::FFN, {4}), 3);
    std::mt19937_64 rng(2);
    const auto b1 = testutil::random_blocks(m, rng);
    const auto b2 = testutil::random_blocks(m, rng);
    const auto t = random_tokens(6, a.vocab, rng);
    const auto x1 = testutil::bind(b1), x1b = testutil::bind(b1), x2 = testutil::bind(b2);
    CHECK(m.logits(t, {}, &x1).storage() == m.logits(t, {}, &x1b).storage());
    CHECK(m.logits(t, {}, &x1).storage() != m.logits(t, {}, &x2).storage());
  }

  TEST_CASE("graceful init leaves the anchor unchanged; perturbing the zero slices does not") {
    for (auto type : kTypes) {
      auto a = tiny_arch();
      auto m = random_model(a, mem_of(type, {3, 2}), 9);
      std::mt19937_64 rng(4);
      std::vector<std::vector<double>> blocks;
      for (const auto& lv : m.layout().levels) {
        std::vector<float> f(lv.size);
        init_level_block(lv, f, rng);
        blocks.emplace_back(f.begin(), f.end());
      }
      const auto t = random_tokens(7, a.vocab, rng);
      const auto plain = m.logits(t);
      const auto bound = testutil::bind(blocks);
      INFO(to_string(type));
      CHECK(testutil::max_abs_diff(m.logits(t, {}, &bound).storage(), plain.storage()) <= 1e-12);

      // The zero-initialized slices are what keeps the memory silent.
      for (std::size_t lv = 0; lv < blocks.size(); ++lv)
        for (const auto& s : m.layout().levels[lv].slots)
          if (s.init == InitKind::ZERO)
            for (std::size_t i = 0; i < s.size(); ++i) blocks[lv][s.offset + i] = 0.05;
      const auto moved = testutil::bind(blocks);
      CHECK(testutil::max_abs_diff(m.logits(t, {}, &moved).storage(), plain.storage()) > 1e-6);
    }
  }

  TEST_CASE("init statistics: truncated normal slices are non-zero and bounded") {
    AnchorConfig a = tiny_arch();
    a.d = 64;
    TransformerModel<float> m(a, mem_of(MemType::FFN, {16}));
    const auto& lv = m.layout().levels[0];
    std::vector<float> blk(lv.size);
    std::mt19937_64 rng(0);
    init_level_block(lv, blk, rng);
    double sum2 = 0;
    std::size_t n = 0;
    for (const auto& s : lv.slots) {
      if (s.init != InitKind::TRUNC_NORMAL) continue;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const float x = blk[s.offset + i];
        CHECK(std::abs(x) <= 0.04f);
        sum2 += double(x) * x, ++n;
      }
    }
    REQUIRE(n > 1000);
    // Std of a normal truncated at 2 sigma is 0.8796 sigma.
    CHECK(std::sqrt(sum2 / n) == doctest::Approx(0.02 * 0.8796).epsilon(0.05));
  }

  TEST_CASE("frozen anchor gets no gradient, memory does") {
    auto a = tiny_arch();
    auto m = random_model(a, mem_of(MemType::LORA_OV, {2}), 6);
    std::mt19937_64 rng(3);
    auto blocks = testutil::random_blocks(m, rng);
    std::vector<double> g(blocks[0].size(), 0.0);
    auto binding = testutil::bind(blocks);
    binding.grads.emplace_back(g);
    const auto t = random_tokens(8, a.vocab, rng);
    std::vector<std::int32_t> tgt(t.begin() + 1, t.end());
    tgt.push_back(-1);

    Tape<double> tape;
    auto logits = m.forward(tape, t, {}, &binding, nullptr);
    tape.backward(hmem::numcore::cross_entropy(logits, std::span<const std::int32_t>(tgt)));
    double gn = 0;
    for (double x : g) gn += x * x;
    CHECK(gn > 0);

    std::fill(g.begin(), g.end(), 0.0);
    auto ag = m.make_grads();
    Tape<double> tape2;
    auto logits2 = m.forward(tape2, t, {}, &binding, &ag);
    tape2.backward(hmem::numcore::cross_entropy(logits2, std::span<const std::int32_t>(tgt)));
    double an = 0;
    for (const auto& x : ag) for (double v : x.storage()) an += v * v;
    gn = 0;
    for (double x : g) gn += x * x;
    CHECK(an > 0);
    CHECK(gn > 0);
  }

  TEST_CASE("sequences longer than the context are rejected") {
    auto a = tiny_arch();
    TransformerModel<float> m(a, {});
    m.init(1);
    std::vector<std::uint32_t> t(a.context + 1, 1);
    CHECK_THROWS_AS(m.logits(t), std::invalid_argument);
  }

  TEST_CASE("document mask is causal and per document") {
    const std::vector<std::uint32_t> docs{0, 0, 1, 1};
    const auto mask = document_mask<double>(docs, 4);
    CHECK(mask(1, 0) == 0.0);
    CHECK(std::isinf(mask(0, 1)));
    CHECK(std::isinf(mask(2, 1)));
    CHECK(mask(3, 2) == 0.0);
  }

  TEST_CASE("checkpoint round trip") {
    auto a = tiny_arch();
    TransformerModel<float> m(a, mem_of(MemType::KV, {2, 1}));
    m.init(12);
    CheckpointHeader h;
    h.arch = a, h.mem = m.memory_config(), h.step = 77, h.config_digest = 5, h.parent_digest = 6;
    std::stringstream ss;
    write_model(ss, m, h);
    const std::string bytes = ss.str();
    std::istringstream in(bytes);
    CheckpointHeader back;
    auto m2 = read_model(in, &back);
    CHECK(back.step == 77);
    CHECK(back.parent_digest == 6);
    CHECK(back.mem.type == MemType::KV);
    for (std::size_t i = 0; i < m.params().size(); ++i)
      CHECK(m.params()[i].value.storage() == m2.params()[i].value.storage());
    std::istringstream cut(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_model(cut), hmem::FormatError);
  }

  TEST_CASE("config parsing names bad fields") {
    auto ini = hmem::IniConfig::from_string("[anchor]\nlayers = 0\n");
    CHECK_THROWS_WITH_AS(AnchorConfig::from_ini(ini), doctest::Contains("anchor.layers"), hmem::ConfigError);
    auto ini2 = hmem::IniConfig::from_string("[memory]\nmultipliers = 4,2\ntype = bogus\n");
    CHECK_THROWS_AS(MemoryConfig::from_ini(ini2), hmem::ConfigError);
    CHECK(parse_mem_type("LoRA-QK") == MemType::LORA_QK);
    CHECK_THROWS_AS(parse_mem_type("dense"), std::invalid_argument);
  }
}
