#include "hmem/model/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"

namespace hmem::model {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

void require_positive(const char* field, std::uint64_t v) {
  if (v == 0) throw ConfigError(field, "must be positive");
}

std::uint32_t to_u32(const std::string& field, std::int64_t v) {
  if (v < 0 || v > 0xffffffffll) throw ConfigError(field, "out of range: " + std::to_string(v));
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void AnchorConfig::validate() const {
  require_positive("anchor.layers", layers);
  require_positive("anchor.d", d);
  require_positive("anchor.heads", heads);
  require_positive("anchor.head_dim", head_dim);
  require_positive("anchor.ffn_dim", ffn_dim);
  require_positive("anchor.vocab", vocab);
  require_positive("anchor.context", context);
  if (head_dim % 2 != 0) throw ConfigError("anchor.head_dim", "must be even for rotary encoding");
  if (!(rope_base > 1.0)) throw ConfigError("anchor.rope_base", "must be greater than 1");
  if (!(norm_eps > 0.0)) throw ConfigError("anchor.norm_eps", "must be positive");
}

std::uint64_t AnchorConfig::digest() const {
  Fnv1a64 h;
  h.update("anchor");
  for (std::uint32_t v : {layers, d, heads, head_dim, ffn_dim, vocab, context}) h.update_pod(v);
  h.update_pod(static_cast<std::uint8_t>(tied_head));
  h.update_pod(static_cast<std::uint8_t>(qk_norm));
  h.update_pod(rope_base);
  h.update_pod(norm_eps);
  return h.value();
}

std::uint64_t AnchorConfig::count_params() const {
  const std::uint64_t D = d, HD = attn_width(), F = ffn_dim, V = vocab;
  const std::uint64_t per_layer = 4 * D * HD + 3 * D * F + 2 * D + (qk_norm ? 2 * HD : 0);
  return layers * per_layer + D + V * D * (tied_head ? 1 : 2);
}

AnchorConfig AnchorConfig::from_ini(const IniConfig& ini, const std::string& s) {
  AnchorConfig c;
  auto u = [&](const char* key, std::uint32_t fb) { return to_u32(s + "." + key, ini.get_int(s, key, fb)); };
  c.layers = u("layers", c.layers);
  c.d = u("d", c.d);
  c.heads = u("heads", c.heads);
  c.head_dim = u("head_dim", c.head_dim);
  c.ffn_dim = u("ffn_dim", c.ffn_dim);
  c.vocab = u("vocab", c.vocab);
  c.context = u("context", c.context);
  c.tied_head = ini.get_bool(s, "tied_head", c.tied_head);
  c.qk_norm = ini.get_bool(s, "qk_norm", c.qk_norm);
  c.rope_base = ini.get_double(s, "rope_base", c.rope_base);
  c.norm_eps = ini.get_double(s, "norm_eps", c.norm_eps);
  c.validate();
  return c;
}

std::string_view to_string(MemType t) {
  switch (t) {
    case MemType::FFN: return "ffn";
    case MemType::LORA_QK: return "lora_qk";
    case MemType::LORA_OV: return "lora_ov";
    case MemType::LORA_FFN: return "lora_ffn";
    case MemType::KV: return "kv";
  }
  return "?";
}

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::UNIFORM: return "uniform";
    case Placement::EARLY: return "early";
    case Placement::MID: return "mid";
    case Placement::LATE: return "late";
  }
  return "?";
}

MemType parse_mem_type(std::string_view s) {
  const auto v = lower(s);
  for (auto t : {MemType::FFN, MemType::LORA_QK, MemType::LORA_OV, MemType::LORA_FFN, MemType::KV})
    if (v == to_string(t)) return t;
  throw std::invalid_argument("unknown memory type '" + std::string(s) + "'");
}

Placement parse_placement(std::string_view s) {
  const auto v = lower(s);
  for (auto p : {Placement::UNIFORM, Placement::EARLY, Placement::MID, Placement::LATE})
    if (v == to_string(p)) return p;
  throw std::invalid_argument("unknown layer placement '" + std::string(s) + "'");
}

std::vector<std::uint32_t> layer_subset(Placement p, std::uint32_t layers) {
  if (layers == 0) throw std::invalid_argument("layer_subset: no layers");
  std::uint32_t m = (layers * 10 + 34) / 35;
  m = std::min(m, layers);
  std::uint32_t start = 0;
  switch (p) {
    case Placement::UNIFORM: m = layers; break;
    case Placement::EARLY: break;
    case Placement::MID: start = (layers - m) / 2; break;
    case Placement::LATE: start = layers - m; break;
  }
  std::vector<std::uint32_t> ids(m);
  for (std::uint32_t i = 0; i < m; ++i) ids[i] = start + i;
  return ids;
}

std::uint64_t block_size(const AnchorConfig& arch, MemType type, Placement placement, std::uint64_t r) {
  const std::uint64_t l = layer_subset(placement, arch.layers).size();
  const std::uint64_t D = arch.d, HD = arch.attn_width(), F = arch.ffn_dim;
  switch (type) {
    case MemType::LORA_QK:
    case MemType::LORA_OV: return 2 * r * l * (D + HD);
    case MemType::LORA_FFN: return 3 * r * l * (D + F);
    case MemType::KV: return 2 * r * l * HD;
    case MemType::FFN: return 3 * r * l * D;
  }
  return 0;
}

std::uint64_t MemoryConfig::total_rank() const noexcept {
  std::uint64_t s = 0;
  for (auto r : multipliers) s += r;
  return s;
}

void MemoryConfig::validate() const {
  if (multipliers.empty()) throw ConfigError("memory.multipliers", "must list one multiplier per tree level");
  if (!(lora_alpha > 0.0)) throw ConfigError("memory.lora_alpha", "must be positive");
}

std::uint64_t MemoryConfig::digest() const {
  Fnv1a64 h;
  h.update("memory");
  for (auto r : multipliers) h.update_pod(r);
  h.update(to_string(type));
  h.update(to_string(placement));
  h.update_pod(lora_alpha);
  return h.value();
}

MemoryConfig MemoryConfig::from_ini(const IniConfig& ini, const std::string& s) {
  MemoryConfig c;
  for (auto v : ini.get_int_list(s, "multipliers", {})) c.multipliers.push_back(to_u32(s + ".multipliers", v));
  try {
    c.type = parse_mem_type(ini.get_string(s, "type", "ffn"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s + ".type", e.what());
  }
  try {
    c.placement = parse_placement(ini.get_string(s, "placement", "uniform"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s + ".placement", e.what());
  }
  c.lora_alpha = ini.get_double(s, "lora_alpha", c.lora_alpha);
  c.validate();
  return c;
}

}  // namespace hmem::model
