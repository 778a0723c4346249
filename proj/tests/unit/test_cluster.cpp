#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "hmem/cluster/kmeans.hpp"
#include "hmem/cluster/tree.hpp"
#include "hmem/common/binary_io.hpp"
#include "hmem/common/ini.hpp"
#include "oracle.hpp"

using namespace hmem::cluster;

namespace {

ClusterTree random_tree(std::uint32_t p, std::uint32_t k, std::uint32_t c, std::uint64_t seed) {
  ClusterTree t(p, k, c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  for (std::uint32_t l = 1; l <= p; ++l)
    for (std::uint32_t id = 1; id <= t.nodes_at(l); ++id)
      for (auto& x : t.centroid(l, id)) x = nd(rng);
  return t;
}

std::vector<float> blobs(std::size_t per_blob, std::uint64_t seed) {
  const float centers[4][2] = {{-5, -5}, {-5, 5}, {5, -5}, {5, 5}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.f, 0.3f);
  std::vector<float> pts;
  for (int b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < per_blob; ++i) pts.push_back(centers[b][0] + nd(rng)), pts.push_back(centers[b][1] + nd(rng));
  return pts;
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("index helpers") {
    CHECK(parent_id(1, 16) == 1);
    CHECK(parent_id(16, 16) == 1);
    CHECK(parent_id(17, 16) == 2);
    CHECK(index_from_leaf(7, 2, 3) == ClusterIndex{2, 4, 7});
    CHECK(nested_consistent({2, 4, 7}, 2));
    CHECK_FALSE(nested_consistent({1, 4, 7}, 2));
    CHECK(level_size(16, 4) == 65536);
    CHECK_THROWS_AS(level_size(16, 9), std::overflow_error);
  }

  TEST_CASE("paper-scale tree has 16, 256, 4096 and 65536 nodes") {
    ClusterTree t(4, 16, 2);
    CHECK(t.nodes_at(1) == 16);
    CHECK(t.nodes_at(2) == 256);
    CHECK(t.nodes_at(3) == 4096);
    CHECK(t.nodes_at(4) == 65536);
  }

  TEST_CASE("k = 1 trees assign all ones") {
    std::mt19937_64 rng(1);
    std::vector<float> pts(20 * 3);
    for (auto& x : pts) x = std::normal_distribution<float>()(rng);
    ClusterTrainConfig cfg;
    cfg.balance_limit = 1.0;
    cfg.steps = 3;
    cfg.batch_per_step = 20;
    auto t = train_tree(pts, 3, 3, 1, cfg);
    for (int i = 0; i < 5; ++i) CHECK(t.assign(std::span(pts).subspan(i * 3, 3)) == ClusterIndex{1, 1, 1});
  }

  TEST_CASE("assign uses exactly p*k comparisons and returns nested indices") {
    auto t = random_tree(3, 5, 4, 2);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
      std::vector<float> v(4);
      for (auto& x : v) x = std::normal_distribution<float>()(rng);
      std::uint64_t cmp = 0;
      const auto idx = t.assign(v, &cmp);
      CHECK(cmp == 15);
      CHECK(nested_consistent(idx, 5));
    }
    CHECK_THROWS_AS(t.assign(std::vector<float>(3)), std::invalid_argument);
  }

  TEST_CASE("a vector on a centroid chain lands in that leaf") {
    ClusterTree t(2, 2, 2);
    const float c1[2][2] = {{0, 0}, {10, 10}};
    for (int i = 0; i < 2; ++i) std::copy(c1[i], c1[i] + 2, t.centroid(1, i + 1).begin());
    const float c2[4][2] = {{-1, 0}, {1, 0}, {10, 9}, {10, 11}};
    for (int i = 0; i < 4; ++i) std::copy(c2[i], c2[i] + 2, t.centroid(2, i + 1).begin());
    CHECK(t.assign(std::vector<float>{10, 11}) == ClusterIndex{2, 4});
    CHECK(t.assign(std::vector<float>{-1, 0}) == ClusterIndex{1, 1});
  }

  TEST_CASE("ties go to the lowest child") {
    ClusterTree t(1, 3, 2);
    for (std::uint32_t i = 1; i <= 3; ++i) t.centroid(1, i)[0] = 1.f;
    CHECK(t.assign(std::vector<float>{0, 0}) == ClusterIndex{1});
  }

  TEST_CASE("greedy descent agrees with exhaustive per-level argmin path") {
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
      auto t = random_tree(2, 2, 3, 100 + trial);
      std::vector<std::vector<double>> cents;
      for (std::uint32_t l = 1; l <= 2; ++l) {
        auto c = t.level_centroids(l);
        cents.emplace_back(c.begin(), c.end());
      }
      std::mt19937_64 rng(trial);
      std::vector<float> v(3);
      for (auto& x : v) x = std::normal_distribution<float>()(rng);
      const auto greedy = t.assign(v);
      const auto oracle = refcheck::oracle_nearest_leaf(std::vector<double>(v.begin(), v.end()), cents, 2);
      agree += greedy == ClusterIndex(oracle.value.begin(), oracle.value.end());
    }
    MESSAGE("greedy agrees with the oracle on " << agree << "/100 points");
    CHECK(agree == 100);
  }

  TEST_CASE("serialization round-trips bit-exactly and rejects damage") {
    auto t = random_tree(2, 3, 5, 9);
    t.level_counts(1)[1] = 42;
    t.config_digest = 0x1234;
    t.parent_digest = 0x5678;
    const auto bytes = serialize_tree(t);
    const auto back = deserialize_tree(bytes);
    CHECK(serialize_tree(back) == bytes);
    CHECK(back.centroid(2, 7)[3] == t.centroid(2, 7)[3]);
    CHECK(back.count(1, 2) == 42);
    CHECK(back.parent_digest == 0x5678);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_tree(bad), hmem::FormatError);
    CHECK_THROWS_AS(deserialize_tree(bytes.substr(0, bytes.size() - 5)), hmem::FormatError);
    auto ver = bytes;
    ver[4] = char(99);
    CHECK_THROWS_WITH_AS(deserialize_tree(ver), doctest::Contains("version"), hmem::FormatError);

    const auto dir = testutil::scratch_dir("tree");
    save_tree(t, dir + "/t.bin");
    CHECK(serialize_tree(load_tree(dir + "/t.bin")) == bytes);
  }

  TEST_CASE("balance_split leaves balanced assignments alone") {
    std::vector<std::uint32_t> a{0, 1, 2, 3, 0, 1, 2, 3};
    std::vector<std::size_t> sizes(4);
    std::mt19937_64 rng(1);
    const auto before = a;
    CHECK(balance_split(a, sizes, 0.25, rng) == 0);
    CHECK(a == before);
  }

  TEST_CASE("balance_split halves a full cluster with the empty one") {
    std::vector<std::uint32_t> a(100, 0);
    std::vector<std::size_t> sizes(2);
    std::mt19937_64 rng(5);
    balance_split(a, sizes, 0.5, rng);
    CHECK(sizes[0] == 50);
    CHECK(sizes[1] == 50);
  }

  TEST_CASE("balance_split meets the limit after the pass") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint32_t> a(640);
      std::geometric_distribution<int> g(0.5);
      for (auto& x : a) x = std::min(g(gen), 15);
      std::vector<std::size_t> sizes(16);
      std::mt19937_64 rng(trial);
      balance_split(a, sizes, 0.094, rng);
      const auto mx = *std::max_element(sizes.begin(), sizes.end());
      CHECK(double(mx) / a.size() <= 0.094);
    }
  }

  TEST_CASE("balance_split replays identically under the same seed") {
    std::vector<std::uint32_t> base(500);
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = i % 7 == 0 ? 1 : 0;
    auto run = [&](std::uint64_t seed) {
      auto a = base;
      std::vector<std::size_t> s(2);
      std::mt19937_64 rng(seed);
      balance_split(a, s, 0.3, rng);
      return a;
    };
    CHECK(run(4) == run(4));
    CHECK(run(4) != run(5));
  }

  TEST_CASE("four blobs match Lloyd's oracle up to permutation") {
    const auto pts = blobs(10, 21);
    ClusterTrainConfig cfg;
    cfg.steps = 20;
    cfg.batch_per_step = 40;
    cfg.balance_limit = 0.3;
    cfg.seed = 8;
    TrainLog log;
    auto t = train_tree(pts, 2, 1, 4, cfg, &log);
    std::vector<double> dpts(pts.begin(), pts.end());
    // Oracle on the same normalized points the trainer sees.
    for (std::size_t i = 0; i < dpts.size(); i += 2) {
      const double n = std::hypot(dpts[i], dpts[i + 1]);
      dpts[i] /= n, dpts[i + 1] /= n;
    }
    const auto oracle = refcheck::oracle_kmeans(dpts, 2, 4);
    std::map<std::uint32_t, std::set<std::uint32_t>> mapping;
    for (std::size_t i = 0; i < 40; ++i) {
      const std::vector<float> v{float(dpts[2 * i]), float(dpts[2 * i + 1])};
      mapping[oracle.value[i]].insert(t.assign(v)[0]);
    }
    CHECK(mapping.size() == 4);
    std::set<std::uint32_t> images;
    for (const auto& [o, ours] : mapping) {
      CHECK(ours.size() == 1);
      images.insert(*ours.begin());
    }
    CHECK(images.size() == 4);
  }

  TEST_CASE("training log respects the balance limit after every pass") {
    std::mt19937_64 rng(17);
    std::vector<float> pts;
    for (int i = 0; i < 3000; ++i) {
      const int c = std::min(std::geometric_distribution<int>(0.4)(rng), 7);
      for (int d = 0; d < 6; ++d) pts.push_back((d == c % 6 ? 3.f : 0.f) + std::normal_distribution<float>(0, .5f)(rng));
    }
    ClusterTrainConfig cfg;
    cfg.steps = 8;
    cfg.batch_per_step = 600;
    cfg.balance_limit = 0.094 * 16 / 4;
    TrainLog log;
    auto t = train_tree(pts, 6, 2, 4, cfg, &log);
    REQUIRE_FALSE(log.events.empty());
    for (const auto& e : log.events) CHECK(e.max_fraction <= cfg.balance_limit + 1e-12);
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    const auto pts = blobs(30, 2);
    ClusterTrainConfig cfg;
    cfg.steps = 5;
    cfg.batch_per_step = 64;
    cfg.balance_limit = 0.6;
    cfg.seed = 3;
    CHECK(serialize_tree(train_tree(pts, 2, 2, 2, cfg)) == serialize_tree(train_tree(pts, 2, 2, 2, cfg)));
  }

  TEST_CASE("too few distinct vectors names the node") {
    std::vector<float> pts(10 * 2, 1.f);
    ClusterTrainConfig cfg;
    cfg.balance_limit = 0.5;
    try {
      train_tree(pts, 2, 1, 3, cfg);
      FAIL("no throw");
    } catch (const ClusterError& e) {
      CHECK(e.level() == 0);
      CHECK(e.node() == 1);
    }
  }

  TEST_CASE("balance limit below 1/k is a config error") {
    ClusterTrainConfig cfg;
    cfg.balance_limit = 0.2;
    CHECK_THROWS_WITH_AS(cfg.validate(4), doctest::Contains("cluster.balance_limit"), hmem::ConfigError);
    CHECK_NOTHROW(cfg.validate(5));
  }
}
