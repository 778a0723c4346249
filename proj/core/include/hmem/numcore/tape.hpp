#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "hmem/numcore/tensor.hpp"

namespace hmem::numcore {

template <class Real>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <class Real>
class Var {
 public:
  Var() = default;

  Tape<Real>& tape() const noexcept { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  /// The reference is invalidated by the next node recorded on the tape.
  const Shape& shape() const;
  std::span<const Real> value() const;
  bool requires_grad() const;
  /// Value of a one-element tensor.
  Real item() const;

 private:
  friend class Tape<Real>;
  Var(Tape<Real>* t, std::uint32_t id) : tape_(t), id_(id) {}
  Tape<Real>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Ops append nodes in execution order; backward() walks them in
/// reverse, calling each node's backward function once.
///
/// Leaves come in two flavours: owned (value copied onto the tape, gradient kept on
/// the tape) and external (value and gradient live in caller storage; gradients are
/// accumulated straight into the caller's buffer, so several tapes can feed one
/// parameter gradient).
template <class Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const Real> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> constant(Tensor<Real> value);
  Var<Real> leaf(Tensor<Real> value, bool requires_grad = true);
  /// `value` must outlive the tape. An empty `grad_sink` means no gradient is wanted.
  Var<Real> external(std::span<const Real> value, Shape shape, std::span<Real> grad_sink = {});

  /// Records an op output. The node requires grad iff any input does; otherwise `fn`
  /// is dropped.
  Var<Real> record(Shape shape, std::vector<Real> value, std::initializer_list<Var<Real>> inputs, BackwardFn fn);
  Var<Real> record(Shape shape, std::vector<Real> value, std::span<const Var<Real>> inputs, BackwardFn fn);

  /// Gradient accumulation target for `v` during backward; empty if `v` needs no grad.
  std::span<Real> grad_for(Var<Real> v);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws std::invalid_argument if the
  /// loss is not a one-element tensor. When `visited` is given, the ids of nodes whose
  /// backward function ran are appended in visiting order.
  void backward(Var<Real> loss, std::vector<std::uint32_t>* visited = nullptr);

  /// Gradient of an owned leaf (or any node) after backward; empty if none reached it.
  std::span<const Real> grad(Var<Real> v) const;

  const Shape& shape(Var<Real> v) const { return nodes_[v.id()].shape; }
  std::span<const Real> value(Var<Real> v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var<Real> v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<Real> owned;
    std::span<const Real> value;
    std::vector<Real> grad;
    std::span<Real> grad_sink;
    bool requires_grad = false;
    BackwardFn backward;
  };
  Var<Real> push(Node n);
  std::vector<Node> nodes_;
};

template <class Real>
const Shape& Var<Real>::shape() const {
  return tape_->shape(*this);
}
template <class Real>
std::span<const Real> Var<Real>::value() const {
  return tape_->value(*this);
}
template <class Real>
bool Var<Real>::requires_grad() const {
  return tape_->requires_grad(*this);
}
template <class Real>
Real Var<Real>::item() const {
  const auto v = value();
  if (v.size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return v[0];
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace hmem::numcore
