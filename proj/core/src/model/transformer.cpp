#include "hmem/model/transformer.hpp"

#include <array>
#include <limits>
#include <random>
#include <stdexcept>

#include "hmem/numcore/ops.hpp"

namespace hmem::model {

using namespace hmem::numcore;

namespace {

// Parameter order per layer; index offsets are relative to 1 + layer * kPerLayer.
enum LayerParam : std::size_t {
  ATTN_NORM, WQ, WK, WV, WO, Q_NORM, K_NORM, FFN_NORM, W1, W2, W3, kPerLayer
};

constexpr std::size_t kSlots = static_cast<std::size_t>(Slot::KV_V) + 1;

}  // namespace

template <class Real>
TransformerModel<Real>::TransformerModel(AnchorConfig arch, MemoryConfig mem)
    : arch_(arch), mem_(std::move(mem)) {
  arch_.validate();
  if (!mem_.multipliers.empty()) layout_ = MemorySlotLayout::build(arch_, mem_);
  const std::size_t D = arch_.d, HD = arch_.attn_width(), F = arch_.ffn_dim, V = arch_.vocab;
  auto add = [&](std::string name, Shape shape) {
    params_.push_back({std::move(name), Tensor<Real>(shape), shape.size() == 2});
  };
  add("tok_emb", {V, D});
  for (std::uint32_t l = 0; l < arch_.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    add(p + "attn_norm", {D});
    add(p + "wq", {D, HD});
    add(p + "wk", {D, HD});
    add(p + "wv", {D, HD});
    add(p + "wo", {HD, D});
    add(p + "q_norm", {arch_.qk_norm ? HD : 0});
    add(p + "k_norm", {arch_.qk_norm ? HD : 0});
    add(p + "ffn_norm", {D});
    add(p + "w1", {D, F});
    add(p + "w2", {D, F});
    add(p + "w3", {F, D});
  }
  add("final_norm", {D});
  add("head", {arch_.tied_head ? 0 : D, V});
}

template <class Real>
void TransformerModel<Real>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    auto v = p.value.data();
    if (p.value.rank() == 1) {
      std::fill(v.begin(), v.end(), Real(1));
    } else {
      for (auto& x : v) x = static_cast<Real>(truncated_normal(rng));
    }
  }
}

template <class Real>
std::uint64_t TransformerModel<Real>::enumerate_params() const {
  std::uint64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <class Real>
std::vector<Tensor<Real>> TransformerModel<Real>::make_grads() const {
  std::vector<Tensor<Real>> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.shape());
  return g;
}

template <class Real>
Tensor<Real> document_mask(std::span<const std::uint32_t> doc_ids, std::size_t T) {
  Tensor<Real> m({T, T}, Real(0));
  const Real ninf = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < T; ++j) {
      const bool same = doc_ids.empty() || doc_ids[i] == doc_ids[j];
      if (j > i || !same) m(i, j) = ninf;
    }
  return m;
}

template <class Real>
typename TransformerModel<Real>::Var TransformerModel<Real>::forward(Tape& tape, std::span<const std::uint32_t> tokens,
                                                                     std::span<const std::uint32_t> doc_ids,
                                                                     const MemoryBinding<Real>* mem,
                                                                     std::vector<Tensor<Real>>* anchor_grads) const {
  const std::size_t T = tokens.size();
  if (T == 0) throw std::invalid_argument("forward: empty token sequence");
  if (T > arch_.context)
    throw std::invalid_argument("forward: sequence length " + std::to_string(T) + " exceeds context " +
                                std::to_string(arch_.context));
  if (!doc_ids.empty() && doc_ids.size() != T)
    throw std::invalid_argument("forward: doc_ids length does not match tokens");
  if (anchor_grads && anchor_grads->size() != params_.size())
    throw std::invalid_argument("forward: gradient buffer count does not match parameters");

  std::vector<Var> P(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::span<Real> sink;
    if (anchor_grads) sink = (*anchor_grads)[i].data();
    P[i] = tape.external(params_[i].value.data(), params_[i].value.shape(), sink);
  }

  // Memory sub-tensors per anchor layer and slot, one entry per non-empty level.
  std::vector<std::array<std::vector<Var>, kSlots>> slots;
  if (mem) {
    if (mem->values.size() != layout_.levels.size())
      throw std::invalid_argument("forward: memory binding has " + std::to_string(mem->values.size()) +
                                  " levels, layout has " + std::to_string(layout_.levels.size()));
    slots.resize(arch_.layers);
    for (std::size_t lv = 0; lv < layout_.levels.size(); ++lv) {
      const auto& L = layout_.levels[lv];
      if (L.size == 0) continue;
      if (mem->values[lv].size() != L.size)
        throw std::invalid_argument("forward: level " + std::to_string(lv + 1) + " block has " +
                                    std::to_string(mem->values[lv].size()) + " values, expected " +
                                    std::to_string(L.size));
      const bool want_grad = lv < mem->grads.size() && !mem->grads[lv].empty();
      for (const auto& s : L.slots) {
        std::span<Real> sink;
        if (want_grad) sink = mem->grads[lv].subspan(s.offset, s.size());
        slots[s.layer][static_cast<std::size_t>(s.slot)].push_back(
            tape.external(mem->values[lv].subspan(s.offset, s.size()), {s.rows, s.cols}, sink));
      }
    }
  }
  const Real lora_scale =
      mem_.total_rank() ? static_cast<Real>(mem_.lora_alpha / static_cast<double>(mem_.total_rank())) : Real(0);
  auto lora = [&](Var y, Var x, const std::vector<Var>& A, const std::vector<Var>& B) {
    for (std::size_t i = 0; i < A.size(); ++i) y = add(y, scale(matmul(matmul(x, A[i]), B[i]), lora_scale));
    return y;
  };

  const Tensor<Real> mask = document_mask<Real>(doc_ids, T);
  std::vector<std::size_t> pos(T);
  for (std::size_t i = 0; i < T; ++i) pos[i] = i;
  const Real eps = static_cast<Real>(arch_.norm_eps);
  const std::size_t H = arch_.heads;
  static const std::vector<Var> none;

  Var x = embedding(P[0], tokens);
  for (std::uint32_t l = 0; l < arch_.layers; ++l) {
    const std::size_t b = 1 + l * kPerLayer;
    const auto* S = slots.empty() ? nullptr : &slots[l];
    auto get = [&](Slot s) -> const std::vector<Var>& { return S ? (*S)[static_cast<std::size_t>(s)] : none; };

    Var h = rms_norm(x, P[b + ATTN_NORM], eps);
    Var q = lora(matmul(h, P[b + WQ]), h, get(Slot::Q_A), get(Slot::Q_B));
    Var k = lora(matmul(h, P[b + WK]), h, get(Slot::K_A), get(Slot::K_B));
    Var v = lora(matmul(h, P[b + WV]), h, get(Slot::V_A), get(Slot::V_B));
    if (arch_.qk_norm) {
      q = rms_norm(q, P[b + Q_NORM], eps);
      k = rms_norm(k, P[b + K_NORM], eps);
    }
    Var a = attention(rope(q, pos, H, arch_.rope_base), rope(k, pos, H, arch_.rope_base), v, &mask, H);
    if (const auto& mk = get(Slot::KV_K); !mk.empty()) {
      // Learned memory keys see the un-rotated query and no mask.
      const auto& mv = get(Slot::KV_V);
      Var K = mk.size() == 1 ? mk[0] : concat<Real>(mk, 0);
      Var V = mv.size() == 1 ? mv[0] : concat<Real>(mv, 0);
      a = add(a, attention<Real>(q, K, V, nullptr, H));
    }
    x = add(x, lora(matmul(a, P[b + WO]), a, get(Slot::O_A), get(Slot::O_B)));

    h = rms_norm(x, P[b + FFN_NORM], eps);
    Var g1 = lora(matmul(h, P[b + W1]), h, get(Slot::F1_A), get(Slot::F1_B));
    Var g2 = lora(matmul(h, P[b + W2]), h, get(Slot::F2_A), get(Slot::F2_B));
    Var g = mul(silu(g1), g2);
    Var f = lora(matmul(g, P[b + W3]), g, get(Slot::F3_A), get(Slot::F3_B));
    // Extra inner columns of the SwiGLU, one group per level; equal to concatenation.
    const auto& m1 = get(Slot::FFN_W1);
    const auto& m2 = get(Slot::FFN_W2);
    const auto& m3 = get(Slot::FFN_W3);
    for (std::size_t i = 0; i < m1.size(); ++i) f = add(f, matmul(mul(silu(matmul(h, m1[i])), matmul(h, m2[i])), m3[i]));
    x = add(x, f);
  }
  x = rms_norm(x, P[1 + arch_.layers * kPerLayer], eps);
  return arch_.tied_head ? matmul_nt(x, P[0]) : matmul(x, P[2 + arch_.layers * kPerLayer]);
}

template <class Real>
Tensor<Real> TransformerModel<Real>::logits(std::span<const std::uint32_t> tokens,
                                            std::span<const std::uint32_t> doc_ids,
                                            const MemoryBinding<Real>* mem) const {
  Tape tape;
  Var out = forward(tape, tokens, doc_ids, mem, nullptr);
  auto v = out.value();
  return Tensor<Real>(out.shape(), std::vector<Real>(v.begin(), v.end()));
}

template class TransformerModel<float>;
template class TransformerModel<double>;
template Tensor<float> document_mask<float>(std::span<const std::uint32_t>, std::size_t);
template Tensor<double> document_mask<double>(std::span<const std::uint32_t>, std::size_t);

}  // namespace hmem::model
