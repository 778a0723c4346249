#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmem/model/config.hpp"
#include "hmem/model/layout.hpp"
#include "hmem/numcore/tape.hpp"
#include "hmem/numcore/tensor.hpp"

namespace hmem::model {

/// Memory parameters for one forward pass: one span per level (empty for r_l = 0),
/// laid out as in MemorySlotLayout. `grads`, when non-empty, receives d(loss)/d(values)
/// by accumulation, level by level.
template <class Real>
struct MemoryBinding {
  std::vector<std::span<const Real>> values;
  std::vector<std::span<Real>> grads;
};

template <class Real>
struct Param {
  std::string name;
  numcore::Tensor<Real> value;
  bool decay = false;  // matrices decay, gains do not
};

/// Pre-norm decoder-only transformer: RMS norm, rotary attention with optional QK norm,
/// SwiGLU FFN, tied or untied output head, with one optional memory attachment type.
template <class Real>
class TransformerModel {
 public:
  using Tape = numcore::Tape<Real>;
  using Var = numcore::Var<Real>;

  TransformerModel(AnchorConfig arch, MemoryConfig mem);

  /// Anchor init: truncated normal (std 0.02) matrices, unit gains.
  void init(std::uint64_t seed);

  const AnchorConfig& arch() const noexcept { return arch_; }
  const MemoryConfig& memory_config() const noexcept { return mem_; }
  const MemorySlotLayout& layout() const noexcept { return layout_; }

  std::vector<Param<Real>>& params() noexcept { return params_; }
  const std::vector<Param<Real>>& params() const noexcept { return params_; }
  /// Sum of parameter tensor sizes (compare with AnchorConfig::count_params).
  std::uint64_t enumerate_params() const;
  /// Zero-filled gradient buffers matching params().
  std::vector<numcore::Tensor<Real>> make_grads() const;

  /// Logits [T, V] for `tokens`. Positions i and j attend iff j <= i and doc_ids agree.
  /// `mem` null means no memory. `anchor_grads` null means the anchor is treated as
  /// constant; otherwise gradients accumulate into it during backward.
  Var forward(Tape& tape, std::span<const std::uint32_t> tokens, std::span<const std::uint32_t> doc_ids,
              const MemoryBinding<Real>* mem, std::vector<numcore::Tensor<Real>>* anchor_grads) const;

  /// Inference helper; single-document when doc_ids is empty.
  numcore::Tensor<Real> logits(std::span<const std::uint32_t> tokens, std::span<const std::uint32_t> doc_ids = {},
                               const MemoryBinding<Real>* mem = nullptr) const;

  /// Copies parameter values from a model with the same architecture and another precision.
  template <class Other>
  void copy_from(const TransformerModel<Other>& other) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto src = other.params()[i].value.data();
      auto dst = params_[i].value.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<Real>(src[j]);
    }
  }

 private:
  AnchorConfig arch_;
  MemoryConfig mem_;
  MemorySlotLayout layout_;
  std::vector<Param<Real>> params_;
};

/// Builds the additive causal, per-document mask.
template <class Real>
numcore::Tensor<Real> document_mask(std::span<const std::uint32_t> doc_ids, std::size_t T);

extern template class TransformerModel<float>;
extern template class TransformerModel<double>;

}  // namespace hmem::model
