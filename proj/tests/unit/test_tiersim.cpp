#include <numeric>

#include "doctest.h"
#include "hmem/common/ini.hpp"
#include "hmem/tiersim/latency.hpp"
#include "hmem/tiersim/tier_spec.hpp"
#include "oracle.hpp"

using namespace hmem::tiersim;

namespace {

TierPlacement three_tiers(double bpp = 2.0) {
  TierPlacement p;
  p.tiers = {{"ram", 20e9, 1e-6}, {"flash", 2e9, 1e-4}, {"disk", 0.2e9, 5e-3}};
  p.level_tier = {0, 1, 2, 2};
  p.bytes_per_param = bpp;
  return p;
}

std::vector<refcheck::OracleTier> oracle_tiers(const TierPlacement& p) {
  std::vector<refcheck::OracleTier> out;
  for (const auto& lt : p.level_tier) out.push_back({p.tiers[*lt].bandwidth, p.tiers[*lt].fixed_latency});
  return out;
}

}  // namespace

TEST_SUITE("tiersim") {
  TEST_CASE("one level of a million params on a 1 GB/s tier takes 4 ms") {
    TierPlacement p;
    p.tiers = {{"t", 1e9, 0}};
    p.level_tier = {0};
    p.bytes_per_param = 4;
    CHECK(load_latency(std::vector<std::uint64_t>{1000000}, p) == doctest::Approx(0.004));
  }

  TEST_CASE("empty memories cost nothing") {
    CHECK(load_latency(std::vector<std::uint64_t>{0, 0, 0, 0}, three_tiers()) == 0.0);
  }

  TEST_CASE("agrees with the arithmetic oracle in both aggregation modes") {
    const std::vector<std::uint64_t> sizes{9437184, 2359296, 589824, 0};
    const auto p = three_tiers();
    for (bool par : {true, false}) {
      const auto ours = load_latency(sizes, p, par ? Aggregation::PARALLEL : Aggregation::SERIAL);
      const auto ref = refcheck::oracle_latency(sizes, oracle_tiers(p), 2.0, par);
      CHECK(ours == doctest::Approx(ref.value).epsilon(1e-12));
    }
  }

  TEST_CASE("unplaced non-empty level is an error") {
    auto p = three_tiers();
    p.level_tier[1] = std::nullopt;
    CHECK_THROWS_AS(load_latency(std::vector<std::uint64_t>{1, 1, 0, 0}, p), std::invalid_argument);
    CHECK_NOTHROW(load_latency(std::vector<std::uint64_t>{1, 0, 1, 0}, p));
  }

  TEST_CASE("hierarchical placement never loses to the flat slowest tier") {
    const auto p = three_tiers();
    for (std::uint64_t a : {0ull, 1000ull, 5000000ull})
      for (std::uint64_t b : {0ull, 70000ull, 2000000ull})
        for (std::uint64_t c : {1ull, 300000ull}) {
          const std::vector<std::uint64_t> s{a, b, c, 0};
          CHECK(load_latency(s, p) <= flat_latency(s, p));
          CHECK(load_latency(s, p, Aggregation::SERIAL) <= flat_latency(s, p) + 2 * 5e-3);
        }
  }

  TEST_CASE("latency is monotone in every multiplier") {
    hmem::model::AnchorConfig a;
    a.layers = 4, a.d = 64;
    const auto p = three_tiers();
    hmem::model::MemoryConfig m;
    m.multipliers = {8, 4, 2, 0};
    double prev = load_latency(m, a, p, Aggregation::SERIAL);
    for (int step = 0; step < 12; ++step) {
      m.multipliers[step % 4] += 3;
      const double now = load_latency(m, a, p, Aggregation::SERIAL);
      CHECK(now >= prev);
      prev = now;
    }
  }

  TEST_CASE("sessions reload only changed levels") {
    const std::vector<std::uint64_t> sizes{100, 10, 1};
    TierPlacement p;
    p.tiers = {{"t", 1.0, 0}};
    p.level_tier = {0, 0, 0};
    p.bytes_per_param = 1;
    const std::vector<hmem::cluster::ClusterIndex> q{{1, 1, 1}, {1, 1, 1}, {1, 1, 2}, {1, 2, 5}, {2, 5, 17}};
    const auto s = session_latency(q, sizes, p, Aggregation::SERIAL);
    CHECK(s == std::vector<double>{111, 0, 1, 11, 111});
    const auto full = full_reload_latency(q, sizes, p, Aggregation::SERIAL);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(s[i] <= full[i]);
  }

  TEST_CASE("zipf sessions swap cheaper than full reloads") {
    const auto q = zipf_session(1000, 4, 16, 1.1, 3);
    CHECK(q.size() == 1000);
    for (const auto& idx : q) CHECK(hmem::cluster::nested_consistent(idx, 16));
    const std::vector<std::uint64_t> sizes{9437184, 2359296, 589824, 0};
    const auto p = three_tiers();
    const auto swap = session_latency(q, sizes, p);
    const auto full = full_reload_latency(q, sizes, p);
    CHECK(std::accumulate(swap.begin(), swap.end(), 0.0) < std::accumulate(full.begin(), full.end(), 0.0));
    CHECK(zipf_session(50, 4, 16, 1.1, 3) == zipf_session(50, 4, 16, 1.1, 3));
  }

  TEST_CASE("tier spec parsing") {
    const auto ini = hmem::IniConfig::from_string(
        "[tier:ram]\nbandwidth = 2e10\nfixed_latency = 1e-6\n"
        "[tier:disk]\nbandwidth = 2e8\nfixed_latency = 0.005\n"
        "[placement]\nlevel1 = ram\nlevel2 = disk\nbytes_per_param = 4\naggregation = serial\n");
    const auto spec = parse_tier_spec(ini, 3);
    CHECK(spec.aggregation == Aggregation::SERIAL);
    CHECK(spec.placement.bytes_per_param == 4.0);
    REQUIRE(spec.placement.level_tier.size() == 3);
    CHECK(spec.placement.tiers[*spec.placement.level_tier[1]].name == "disk");
    CHECK_FALSE(spec.placement.level_tier[2].has_value());

    auto bad = hmem::IniConfig::from_string("[tier:ram]\nbandwidth = 1e9\n[placement]\nlevel1 = tape\n");
    CHECK_THROWS_WITH_AS(parse_tier_spec(bad, 1), doctest::Contains("placement.level1"), hmem::ConfigError);
    auto neg = hmem::IniConfig::from_string("[tier:ram]\nbandwidth = -1\n[placement]\nlevel1 = ram\n");
    CHECK_THROWS_AS(parse_tier_spec(neg, 1), hmem::ConfigError);
  }
}
