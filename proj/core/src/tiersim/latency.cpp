#include "hmem/tiersim/latency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmem/common/ini.hpp"

namespace hmem::tiersim {

void Tier::validate() const {
  if (!(bandwidth > 0)) throw ConfigError("tier:" + name + ".bandwidth", "must be positive");
  if (!(fixed_latency >= 0)) throw ConfigError("tier:" + name + ".fixed_latency", "must be non-negative");
}

void TierPlacement::validate() const {
  for (const auto& t : tiers) t.validate();
  for (const auto& lt : level_tier)
    if (lt && *lt >= tiers.size()) throw std::invalid_argument("TierPlacement: tier index out of range");
  if (!(bytes_per_param > 0)) throw ConfigError("placement.bytes_per_param", "must be positive");
}

const Tier& TierPlacement::slowest() const {
  const Tier* best = nullptr;
  for (const auto& lt : level_tier)
    if (lt && (!best || tiers[*lt].bandwidth < best->bandwidth)) best = &tiers[*lt];
  if (!best) throw std::invalid_argument("TierPlacement: no level is placed");
  return *best;
}

double level_cost(std::uint64_t params, const Tier& tier, double bytes_per_param) {
  return tier.fixed_latency + static_cast<double>(params) * bytes_per_param / tier.bandwidth;
}

namespace {

const Tier& tier_for(const TierPlacement& pl, std::size_t level0) {
  if (level0 >= pl.level_tier.size() || !pl.level_tier[level0])
    throw std::invalid_argument("load_latency: level " + std::to_string(level0 + 1) + " has no tier placement");
  return pl.tiers.at(*pl.level_tier[level0]);
}

double aggregate(const std::vector<std::uint64_t>& sizes, const TierPlacement& pl, Aggregation agg,
                 const std::vector<bool>* reload) {
  double total = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    if (sizes[l] == 0 || (reload && !(*reload)[l])) continue;
    const double c = level_cost(sizes[l], tier_for(pl, l), pl.bytes_per_param);
    total = agg == Aggregation::PARALLEL ? std::max(total, c) : total + c;
  }
  return total;
}

}  // namespace

double load_latency(const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement, Aggregation agg) {
  return aggregate(level_sizes, placement, agg, nullptr);
}

double load_latency(const model::MemoryConfig& cfg, const model::AnchorConfig& arch, const TierPlacement& placement,
                    Aggregation agg) {
  std::vector<std::uint64_t> sizes;
  for (auto r : cfg.multipliers) sizes.push_back(model::block_size(arch, cfg.type, cfg.placement, r));
  return load_latency(sizes, placement, agg);
}

double flat_latency(const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement) {
  std::uint64_t total = 0;
  for (auto s : level_sizes) total += s;
  if (total == 0) return 0;
  return level_cost(total, placement.slowest(), placement.bytes_per_param);
}

std::vector<double> session_latency(const std::vector<cluster::ClusterIndex>& queries,
                                    const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement,
                                    Aggregation agg) {
  std::vector<double> out;
  out.reserve(queries.size());
  std::vector<bool> reload(level_sizes.size(), true);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].size() != level_sizes.size())
      throw std::invalid_argument("session_latency: query depth does not match level count");
    for (std::size_t l = 0; l < level_sizes.size(); ++l) reload[l] = q == 0 || queries[q][l] != queries[q - 1][l];
    out.push_back(aggregate(level_sizes, placement, agg, &reload));
  }
  return out;
}

std::vector<double> full_reload_latency(const std::vector<cluster::ClusterIndex>& queries,
                                        const std::vector<std::uint64_t>& level_sizes,
                                        const TierPlacement& placement, Aggregation agg) {
  return std::vector<double>(queries.size(), load_latency(level_sizes, placement, agg));
}

std::vector<cluster::ClusterIndex> zipf_session(std::size_t n, std::uint32_t p, std::uint32_t k, double exponent,
                                                std::uint64_t seed) {
  std::vector<double> w(k);
  for (std::uint32_t i = 0; i < k; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
  std::discrete_distribution<std::uint32_t> child(w.begin(), w.end());
  std::mt19937_64 rng(seed);
  std::vector<cluster::ClusterIndex> out(n, cluster::ClusterIndex(p));
  for (auto& q : out) {
    std::uint32_t node = 1;
    for (std::uint32_t l = 0; l < p; ++l) q[l] = node = (node - 1) * k + 1 + child(rng);
  }
  return out;
}

}  // namespace hmem::tiersim
