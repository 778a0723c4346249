#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "hmem/model/config.hpp"

namespace hmem::model {

/// Role of one sub-tensor inside a memory block. LoRA pairs are (A: [in, r], B: [r, out]);
/// the delta on a projection x W is (alpha / R) x A B with R the total rank.
enum class Slot : std::uint8_t {
  FFN_W1,  // [d, r] gate up-projection columns
  FFN_W2,  // [d, r] value up-projection columns
  FFN_W3,  // [r, d] down-projection rows
  Q_A, Q_B, K_A, K_B,
  V_A, V_B, O_A, O_B,
  F1_A, F1_B, F2_A, F2_B, F3_A, F3_B,
  KV_K,  // [r, h d_h] learned keys
  KV_V,  // [r, h d_h] learned values
};

enum class InitKind : std::uint8_t { TRUNC_NORMAL, ZERO, KAIMING_UNIFORM };

std::string_view to_string(Slot s);

struct SlotTensor {
  std::uint32_t layer = 0;  // 0-based anchor layer
  Slot slot = Slot::FFN_W1;
  std::size_t offset = 0;   // within the level block
  std::uint32_t rows = 0, cols = 0;
  InitKind init = InitKind::ZERO;
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * cols; }
};

struct LevelLayout {
  std::uint32_t rank = 0;
  std::size_t size = 0;
  std::vector<SlotTensor> slots;  // ordered by layer, then slot; contiguous and non-overlapping
};

/// Maps the bytes of every level block onto concrete per-layer sub-tensors.
struct MemorySlotLayout {
  std::vector<LevelLayout> levels;
  std::vector<std::uint32_t> layers;  // placed layers
  std::size_t fetch_size = 0;

  static MemorySlotLayout build(const AnchorConfig& arch, const MemoryConfig& mem);
};

/// Graceful initialization of one level block: truncated normal (std 0.02, cut at 2 std)
/// for FFN W1/W2 and KV keys, Kaiming-uniform (bound 1/sqrt(fan_in)) for LoRA A, zeros for
/// FFN W3, LoRA B and KV values. The attached memory is therefore a no-op.
void init_level_block(const LevelLayout& level, std::span<float> block, std::mt19937_64& rng);

/// Truncated normal sample, mean 0, rejecting |x| > 2 std.
float truncated_normal(std::mt19937_64& rng, float std = 0.02f);

}  // namespace hmem::model
