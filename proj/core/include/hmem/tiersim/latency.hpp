#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hmem/cluster/tree.hpp"
#include "hmem/model/config.hpp"

namespace hmem::tiersim {

struct Tier {
  std::string name;
  double bandwidth = 1e9;     // bytes per second
  double fixed_latency = 0;   // seconds per access
  void validate() const;
};

enum class Aggregation { PARALLEL, SERIAL };

struct TierPlacement {
  std::vector<Tier> tiers;
  /// level_tier[l-1]: index into `tiers`, or nullopt for an unplaced level.
  std::vector<std::optional<std::size_t>> level_tier;
  double bytes_per_param = 2.0;

  /// Tier with the lowest bandwidth among placed levels.
  const Tier& slowest() const;
  void validate() const;
};

/// Seconds to read one level-l block of `params` parameters from its tier.
double level_cost(std::uint64_t params, const Tier& tier, double bytes_per_param);

/// Max (parallel) or sum (serial) over non-empty levels of
/// fixed_latency + s_l * bytes_per_param / bandwidth. Throws std::invalid_argument if a
/// non-empty level has no tier.
double load_latency(const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement,
                    Aggregation agg = Aggregation::PARALLEL);
double load_latency(const model::MemoryConfig& cfg, const model::AnchorConfig& arch, const TierPlacement& placement,
                    Aggregation agg = Aggregation::PARALLEL);

/// The whole fetch read as one extent from the slowest placed tier.
double flat_latency(const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement);

/// Per-query cost when only levels whose id changed since the previous query are read.
std::vector<double> session_latency(const std::vector<cluster::ClusterIndex>& queries,
                                    const std::vector<std::uint64_t>& level_sizes, const TierPlacement& placement,
                                    Aggregation agg = Aggregation::PARALLEL);
/// Per-query cost of reloading every level on every query with the same placement.
std::vector<double> full_reload_latency(const std::vector<cluster::ClusterIndex>& queries,
                                        const std::vector<std::uint64_t>& level_sizes,
                                        const TierPlacement& placement, Aggregation agg = Aggregation::PARALLEL);

/// Queries whose child at every level is drawn from a Zipf(exponent) law over the k
/// children of the previous choice.
std::vector<cluster::ClusterIndex> zipf_session(std::size_t n, std::uint32_t p, std::uint32_t k, double exponent,
                                                std::uint64_t seed);

}  // namespace hmem::tiersim
