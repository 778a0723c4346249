#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hmem/model/transformer.hpp"
#include "oracle.hpp"

namespace testutil {

inline std::string fixture(const std::string& name) { return std::string(HMEM_FIXTURE_DIR) + "/" + name; }
inline std::string config_file(const std::string& name) { return std::string(HMEM_CONFIG_DIR) + "/" + name; }

/// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hmem_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::vector<double> normal_vec(std::size_t n, std::mt19937_64& rng, double std = 1.0) {
  std::normal_distribution<double> nd(0.0, std);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::string oracle_type(hmem::model::MemType t) {
  switch (t) {
    case hmem::model::MemType::FFN: return "ffn";
    case hmem::model::MemType::LORA_QK: return "lora_qk";
    case hmem::model::MemType::LORA_OV: return "lora_ov";
    case hmem::model::MemType::LORA_FFN: return "lora_ffn";
    case hmem::model::MemType::KV: return "kv";
  }
  return "";
}

/// Oracle weights mirroring a double-precision model and its memory blocks.
inline refcheck::OracleWeights to_oracle(const hmem::model::TransformerModel<double>& m,
                                         const std::vector<std::vector<double>>* blocks = nullptr) {
  const auto& a = m.arch();
  refcheck::OracleWeights w;
  w.layers = a.layers, w.d = a.d, w.heads = a.heads, w.head_dim = a.head_dim, w.ffn = a.ffn_dim, w.vocab = a.vocab;
  w.tied = a.tied_head, w.qk_norm = a.qk_norm, w.rope_base = a.rope_base, w.eps = a.norm_eps;
  const auto& ps = m.params();
  auto vec = [](const hmem::model::Param<double>& p) { return p.value.storage(); };
  std::size_t i = 0;
  w.tok_emb = vec(ps[i++]);
  for (std::uint32_t l = 0; l < a.layers; ++l) {
    refcheck::OracleLayer L;
    L.attn_norm = vec(ps[i++]), L.wq = vec(ps[i++]), L.wk = vec(ps[i++]), L.wv = vec(ps[i++]);
    L.wo = vec(ps[i++]), L.q_norm = vec(ps[i++]), L.k_norm = vec(ps[i++]), L.ffn_norm = vec(ps[i++]);
    L.w1 = vec(ps[i++]), L.w2 = vec(ps[i++]), L.w3 = vec(ps[i++]);
    w.layer.push_back(std::move(L));
  }
  w.final_norm = vec(ps[i++]);
  w.head = vec(ps[i++]);
  if (blocks) {
    const auto& mc = m.memory_config();
    w.mem_type = oracle_type(mc.type);
    for (auto r : mc.multipliers) w.ranks.push_back(r);
    for (auto l : m.layout().layers) w.mem_layers.push_back(l);
    w.mem_blocks = *blocks;
    w.lora_alpha = mc.lora_alpha;
  }
  return w;
}

/// Random values for every level block (sized by the model's layout).
inline std::vector<std::vector<double>> random_blocks(const hmem::model::TransformerModel<double>& m,
                                                      std::mt19937_64& rng, double std = 0.1) {
  std::vector<std::vector<double>> out;
  for (const auto& lv : m.layout().levels) out.push_back(normal_vec(lv.size, rng, std));
  return out;
}

inline hmem::model::MemoryBinding<double> bind(const std::vector<std::vector<double>>& blocks) {
  hmem::model::MemoryBinding<double> b;
  for (const auto& blk : blocks) b.values.emplace_back(blk);
  return b;
}

}  // namespace testutil
