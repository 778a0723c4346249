#pragma once

#include <string>

#include "hmem/tiersim/latency.hpp"

namespace hmem {
class IniConfig;
}

namespace hmem::tiersim {

struct TierSpec {
  TierPlacement placement;
  Aggregation aggregation = Aggregation::PARALLEL;
};

/// Tiers are [tier:<name>] sections with `bandwidth` (bytes/s, e.g. 2e9) and
/// `fixed_latency` (seconds). [placement] maps `level1`, `level2`, ... to tier names and
/// may set `bytes_per_param` and `aggregation` (parallel | serial).
TierSpec parse_tier_spec(const IniConfig& ini, std::uint32_t depth);
TierSpec load_tier_spec(const std::string& path, std::uint32_t depth);

}  // namespace hmem::tiersim
