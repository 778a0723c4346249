#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hmem {
class IniConfig;
}

namespace hmem::model {

struct AnchorConfig {
  std::uint32_t layers = 4;
  std::uint32_t d = 128;
  std::uint32_t heads = 4;
  std::uint32_t head_dim = 32;
  std::uint32_t ffn_dim = 512;
  std::uint32_t vocab = 259;
  bool tied_head = true;
  /// RMS normalization of the full query and key projections, each with a learned gain.
  bool qk_norm = true;
  double rope_base = 100000.0;
  std::uint32_t context = 256;
  double norm_eps = 1e-5;

  std::uint32_t attn_width() const noexcept { return heads * head_dim; }
  /// Throws hmem::ConfigError naming the offending field.
  void validate() const;
  std::uint64_t digest() const;

  /// Closed form: l(4 d hd + 3 d d_f + 2d + 2 hd [qk_norm]) + d + V d (1 if tied else 2).
  std::uint64_t count_params() const;
  static AnchorConfig from_ini(const IniConfig& ini, const std::string& section = "anchor");
};

enum class MemType { FFN, LORA_QK, LORA_OV, LORA_FFN, KV };
enum class Placement { UNIFORM, EARLY, MID, LATE };

std::string_view to_string(MemType t);
std::string_view to_string(Placement p);
/// Case-insensitive; accepts "ffn", "lora_qk", "lora-qk", ... Throws std::invalid_argument.
MemType parse_mem_type(std::string_view s);
Placement parse_placement(std::string_view s);

/// 0-based ids of the layers carrying memory. EARLY/MID/LATE select m = ceil(10 l / 35)
/// layers: the first m, the last m, or the m starting at floor((l - m) / 2).
std::vector<std::uint32_t> layer_subset(Placement p, std::uint32_t layers);

/// Per-level block size for multiplier r, with l the number of placed layers:
///   LORA_QK, LORA_OV: 2 r l (d + h d_h)    LORA_FFN: 3 r l (d + d_f)
///   KV: 2 r l h d_h                         FFN: 3 r l d
std::uint64_t block_size(const AnchorConfig& arch, MemType type, Placement placement, std::uint64_t r);

struct MemoryConfig {
  /// (r_1, ..., r_p); a zero entry leaves that level empty.
  std::vector<std::uint32_t> multipliers;
  MemType type = MemType::FFN;
  Placement placement = Placement::UNIFORM;
  double lora_alpha = 2.0;

  std::uint32_t depth() const noexcept { return static_cast<std::uint32_t>(multipliers.size()); }
  /// Sum of the multipliers; the effective LoRA rank of a fetched memory.
  std::uint64_t total_rank() const noexcept;
  bool empty() const noexcept { return total_rank() == 0; }
  /// Block size at r = 1 (the c_0 of a config written c_0 (r_1, ..., r_p)).
  std::uint64_t unit_size(const AnchorConfig& arch) const { return block_size(arch, type, placement, 1); }
  void validate() const;
  std::uint64_t digest() const;
  static MemoryConfig from_ini(const IniConfig& ini, const std::string& section = "memory");
};

}  // namespace hmem::model
