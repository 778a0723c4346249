#pragma once

#include <cstdint>
#include <span>

#include "hmem/numcore/tape.hpp"
#include "hmem/numcore/tensor.hpp"

/// Differentiable ops over 2-D row-major tensors. Every op records itself on the tape
/// of its first operand; shape mismatches throw ShapeError naming the op.
namespace hmem::numcore {

/// [m,k] x [k,n] -> [m,n]
template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b);

/// [m,k] x [n,k]^T -> [m,n]
template <class Real>
Var<Real> matmul_nt(Var<Real> a, Var<Real> b);

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b);

/// Elementwise product.
template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b);

template <class Real>
Var<Real> scale(Var<Real> a, Real s);

template <class Real>
Var<Real> silu(Var<Real> a);

/// Softmax over the last axis.
template <class Real>
Var<Real> softmax(Var<Real> a);

/// y = x / sqrt(mean(x^2) + eps) * gain, per row. gain has shape [cols].
template <class Real>
Var<Real> rms_norm(Var<Real> x, Var<Real> gain, Real eps);

/// Row gather: out[t] = table[ids[t]].
template <class Real>
Var<Real> embedding(Var<Real> table, std::span<const std::uint32_t> ids);

/// Concatenation of 2-D tensors along axis 0 (rows) or 1 (features).
template <class Real>
Var<Real> concat(std::span<const Var<Real>> parts, std::size_t axis);

/// Multi-head scaled dot-product attention. q: [Tq, H*dh], k and v: [Tk, H*dh].
/// `mask` is an optional additive [Tq, Tk] matrix (use -inf to forbid) shared by all
/// heads. Scores are scaled by 1/sqrt(dh).
template <class Real>
Var<Real> attention(Var<Real> q, Var<Real> k, Var<Real> v, const Tensor<Real>* mask, std::size_t heads);

/// Rotary position encoding on [T, H*dh]; pairs (2i, 2i+1) of each head are rotated by
/// pos * base^(-2i/dh). Throws ShapeError for odd dh.
template <class Real>
Var<Real> rope(Var<Real> x, std::span<const std::size_t> positions, std::size_t heads, double base);

/// Sum over rows of -log softmax(logits)[target]; rows with target < 0 are skipped.
template <class Real>
Var<Real> nll_sum(Var<Real> logits, std::span<const std::int32_t> targets);

/// Mean of nll_sum over non-ignored rows. Throws if every row is ignored.
template <class Real>
Var<Real> cross_entropy(Var<Real> logits, std::span<const std::int32_t> targets);

}  // namespace hmem::numcore
