#include "hmem/model/layout.hpp"

#include <cmath>
#include <stdexcept>

namespace hmem::model {

std::string_view to_string(Slot s) {
  static constexpr std::string_view names[] = {"ffn_w1", "ffn_w2", "ffn_w3", "q_a",  "q_b",  "k_a",  "k_b",
                                               "v_a",    "v_b",    "o_a",    "o_b",  "f1_a", "f1_b", "f2_a",
                                               "f2_b",   "f3_a",   "f3_b",   "kv_k", "kv_v"};
  return names[static_cast<std::size_t>(s)];
}

MemorySlotLayout MemorySlotLayout::build(const AnchorConfig& arch, const MemoryConfig& mem) {
  MemorySlotLayout out;
  out.layers = layer_subset(mem.placement, arch.layers);
  const std::uint32_t D = arch.d, HD = arch.attn_width(), F = arch.ffn_dim;
  for (auto r : mem.multipliers) {
    LevelLayout lv;
    lv.rank = r;
    if (r > 0) {
      for (auto layer : out.layers) {
        auto add = [&](Slot s, std::uint32_t rows, std::uint32_t cols, InitKind init) {
          lv.slots.push_back({layer, s, lv.size, rows, cols, init});
          lv.size += static_cast<std::size_t>(rows) * cols;
        };
        const auto KU = InitKind::KAIMING_UNIFORM;
        const auto Z = InitKind::ZERO;
        switch (mem.type) {
          case MemType::FFN:
            add(Slot::FFN_W1, D, r, InitKind::TRUNC_NORMAL);
            add(Slot::FFN_W2, D, r, InitKind::TRUNC_NORMAL);
            add(Slot::FFN_W3, r, D, Z);
            break;
          case MemType::LORA_QK:
            add(Slot::Q_A, D, r, KU);
            add(Slot::Q_B, r, HD, Z);
            add(Slot::K_A, D, r, KU);
            add(Slot::K_B, r, HD, Z);
            break;
          case MemType::LORA_OV:
            add(Slot::V_A, D, r, KU);
            add(Slot::V_B, r, HD, Z);
            add(Slot::O_A, HD, r, KU);
            add(Slot::O_B, r, D, Z);
            break;
          case MemType::LORA_FFN:
            add(Slot::F1_A, D, r, KU);
            add(Slot::F1_B, r, F, Z);
            add(Slot::F2_A, D, r, KU);
            add(Slot::F2_B, r, F, Z);
            add(Slot::F3_A, F, r, KU);
            add(Slot::F3_B, r, D, Z);
            break;
          case MemType::KV:
            add(Slot::KV_K, r, HD, InitKind::TRUNC_NORMAL);
            add(Slot::KV_V, r, HD, Z);
            break;
        }
      }
    }
    out.fetch_size += lv.size;
    out.levels.push_back(std::move(lv));
  }
  return out;
}

float truncated_normal(std::mt19937_64& rng, float std) {
  std::normal_distribution<double> n(0.0, 1.0);
  double x;
  do {
    x = n(rng);
  } while (std::abs(x) > 2.0);
  return static_cast<float>(x * std);
}

void init_level_block(const LevelLayout& level, std::span<float> block, std::mt19937_64& rng) {
  if (block.size() != level.size)
    throw std::invalid_argument("init_level_block: block has " + std::to_string(block.size()) +
                                " values, layout expects " + std::to_string(level.size));
  for (const auto& s : level.slots) {
    auto dst = block.subspan(s.offset, s.size());
    switch (s.init) {
      case InitKind::ZERO:
        std::fill(dst.begin(), dst.end(), 0.0f);
        break;
      case InitKind::TRUNC_NORMAL:
        for (auto& x : dst) x = truncated_normal(rng);
        break;
      case InitKind::KAIMING_UNIFORM: {
        // A is stored [fan_in, r].
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& x : dst) x = static_cast<float>(u(rng));
        break;
      }
    }
  }
}

}  // namespace hmem::model
