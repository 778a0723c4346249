#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace hmem::train {

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<float> m, v;
  std::uint64_t step = 0;
  bool allocated() const noexcept { return !m.empty(); }
};

/// Multiplier applied to a parameter by decoupled weight decay in one step.
constexpr double decay_factor(double lr, double weight_decay) noexcept { return 1.0 - lr * weight_decay; }

/// One AdamW step in place. The gradient is multiplied by `grad_scale` (clipping) first;
/// bias correction uses the state's own step counter.
void adamw_update(std::span<float> param, std::span<const float> grad, AdamState& st, double lr, double weight_decay,
                  const AdamWParams& hp, double grad_scale = 1.0);

/// Optimizer state for dense anchor tensors and lazily created per-block bank state.
class SparseOptimizer {
 public:
  using BlockKey = std::pair<std::uint32_t, std::uint32_t>;  // (level, id)

  AdamState& anchor(std::size_t i);
  AdamState& block(std::uint32_t level, std::uint32_t id) { return blocks_[{level, id}]; }
  AdamState& generic() { return generic_; }
  bool has_block(std::uint32_t level, std::uint32_t id) const { return blocks_.count({level, id}) != 0; }
  const std::map<BlockKey, AdamState>& blocks() const noexcept { return blocks_; }
  const AdamState& generic_state() const noexcept { return generic_; }
  std::size_t anchor_count() const noexcept { return anchor_.size(); }

  void write(std::ostream& out) const;
  void read(std::istream& in);

 private:
  std::vector<AdamState> anchor_;
  std::map<BlockKey, AdamState> blocks_;
  AdamState generic_;
};

}  // namespace hmem::train
