#pragma once

// Brute-force reference implementations. Nothing here includes or links the library
// under test; inputs are plain vectors so the tests do the conversion.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace refcheck {

template <class T>
struct OracleResult {
  T value;
  std::string oracle;
};

/// Lloyd's iterations over all points until assignments stop changing. Seeds with
/// farthest-point traversal from point 0, so the result is deterministic.
OracleResult<std::vector<std::uint32_t>> oracle_kmeans(const std::vector<double>& points, std::size_t dim,
                                                       std::uint32_t k, std::size_t max_iter = 1000);

/// centroids[l] holds the k^(l+1) level-(l+1) centroids, row-major. Enumerates every
/// leaf and returns the unique path whose node is the closest child (ties to the lowest
/// id) at every level; ids are 1-based.
OracleResult<std::vector<std::uint32_t>> oracle_nearest_leaf(const std::vector<double>& vec,
                                                             const std::vector<std::vector<double>>& centroids,
                                                             std::uint32_t k);

/// Central differences (f(x+h) - f(x-h)) / 2h, one coordinate at a time.
OracleResult<std::vector<double>> oracle_grad(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> params, double h = 1e-5);

struct OracleLayer {
  std::vector<double> attn_norm, wq, wk, wv, wo, q_norm, k_norm, ffn_norm, w1, w2, w3;
};

/// Weights of a pre-norm decoder. Matrices are row-major [in, out]; tok_emb is [V, d].
/// Memory blocks use the bank layout: per placed layer (ascending), the sub-tensors of the
/// memory type in their fixed order.
struct OracleWeights {
  std::size_t layers = 0, d = 0, heads = 0, head_dim = 0, ffn = 0, vocab = 0;
  bool tied = true, qk_norm = true;
  double rope_base = 10000.0, eps = 1e-5;
  std::vector<double> tok_emb, final_norm, head;
  std::vector<OracleLayer> layer;

  std::string mem_type;  // "", "ffn", "lora_qk", "lora_ov", "lora_ffn", "kv"
  std::vector<std::size_t> ranks;
  std::vector<std::size_t> mem_layers;
  std::vector<std::vector<double>> mem_blocks;
  double lora_alpha = 2.0;
};

/// Logits [T, V] row-major. Attention is causal and, when doc_ids is non-empty, limited
/// to the same document.
OracleResult<std::vector<double>> oracle_forward(const std::vector<std::uint32_t>& tokens, const OracleWeights& w,
                                                 const std::vector<std::uint32_t>& doc_ids = {});

struct OracleTier {
  double bandwidth = 1;
  double latency = 0;
};

/// Seconds to load the given levels. parallel: the slowest level bounds the load;
/// serial: level times add. Levels of size 0 cost nothing.
OracleResult<double> oracle_latency(const std::vector<std::uint64_t>& sizes, const std::vector<OracleTier>& level_tier,
                                    double bytes_per_param, bool parallel);

}  // namespace refcheck
