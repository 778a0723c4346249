#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "oracle.hpp"

TEST_SUITE("refcheck") {
  TEST_CASE("finite differences of x^2 at 3") {
    const auto g = refcheck::oracle_grad([](const std::vector<double>& x) { return x[0] * x[0]; }, {3.0});
    CHECK(std::abs(g.value[0] - 6.0) <= 1e-8);
    CHECK_FALSE(g.oracle.empty());
  }

  TEST_CASE("nearest leaf of a k = 1 tree is leaf 1") {
    const std::vector<std::vector<double>> cents{{0.5, 0.5}, {2.0, -1.0}};
    const auto r = refcheck::oracle_nearest_leaf({9.0, 9.0}, cents, 1);
    CHECK(r.value == std::vector<std::uint32_t>{1, 1});
  }

  TEST_CASE("reference evaluator reproduces the committed hand calculation") {
    std::ifstream f(testutil::fixture("forward_d2.txt"));
    REQUIRE(f);
    std::map<std::string, std::vector<double>> fx;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream is(line);
      std::string key;
      is >> key;
      for (double v; is >> v;) fx[key].push_back(v);
    }
    refcheck::OracleWeights w;
    w.layers = 1, w.d = 2, w.heads = 1, w.head_dim = 2, w.ffn = 2, w.vocab = 4, w.rope_base = 10000;
    w.tok_emb = fx["tok_emb"];
    w.final_norm = fx["final_norm"];
    refcheck::OracleLayer L{fx["attn_norm"], fx["wq"], fx["wk"], fx["wv"], fx["wo"], fx["q_norm"],
                            fx["k_norm"], fx["ffn_norm"], fx["w1"], fx["w2"], fx["w3"]};
    w.layer.push_back(L);
    std::vector<std::uint32_t> tokens;
    for (double t : fx["tokens"]) tokens.push_back(static_cast<std::uint32_t>(t));
    const auto out = refcheck::oracle_forward(tokens, w);
    CHECK(testutil::max_abs_diff(out.value, fx["logits"]) <= 1e-12);
  }

  TEST_CASE("latency arithmetic") {
    const auto r = refcheck::oracle_latency({1000000, 0}, {{1e9, 0.001}, {1.0, 5.0}}, 4.0, true);
    CHECK(r.value == doctest::Approx(0.005));
    const auto s = refcheck::oracle_latency({1000000, 10}, {{1e9, 0.001}, {10.0, 0.0}}, 1.0, false);
    CHECK(s.value == doctest::Approx(0.002 + 1.0));
  }
}
