#include "hmem/numcore/tape.hpp"

#include <algorithm>
#include <stdexcept>

namespace hmem::numcore {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void throw_shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <class Real>
Var<Real> Tape<Real>::push(Node n) {
  nodes_.push_back(std::move(n));
  auto& back = nodes_.back();
  if (!back.owned.empty() || back.value.empty()) back.value = back.owned;
  return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <class Real>
Var<Real> Tape<Real>::constant(Tensor<Real> value) {
  Node n;
  n.shape = value.shape();
  n.owned = std::move(value.storage());
  return push(std::move(n));
}

template <class Real>
Var<Real> Tape<Real>::leaf(Tensor<Real> value, bool requires_grad) {
  Node n;
  n.shape = value.shape();
  n.owned = std::move(value.storage());
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

template <class Real>
Var<Real> Tape<Real>::external(std::span<const Real> value, Shape shape, std::span<Real> grad_sink) {
  if (value.size() != numel(shape))
    throw ShapeError("external: value length " + std::to_string(value.size()) + " vs shape " + shape_str(shape));
  if (!grad_sink.empty() && grad_sink.size() != value.size())
    throw ShapeError("external: grad sink length " + std::to_string(grad_sink.size()) + " vs shape " +
                     shape_str(shape));
  Node n;
  n.shape = std::move(shape);
  n.value = value;
  n.grad_sink = grad_sink;
  n.requires_grad = !grad_sink.empty();
  nodes_.push_back(std::move(n));
  return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <class Real>
Var<Real> Tape<Real>::record(Shape shape, std::vector<Real> value, std::initializer_list<Var<Real>> inputs,
                             BackwardFn fn) {
  return record(std::move(shape), std::move(value), std::span<const Var<Real>>(inputs.begin(), inputs.size()),
                std::move(fn));
}

template <class Real>
Var<Real> Tape<Real>::record(Shape shape, std::vector<Real> value, std::span<const Var<Real>> inputs,
                             BackwardFn fn) {
  if (value.size() != numel(shape))
    throw ShapeError("record: value length " + std::to_string(value.size()) + " vs shape " + shape_str(shape));
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw std::invalid_argument("record: input belongs to a different tape");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <class Real>
std::span<Real> Tape<Real>::grad_for(Var<Real> v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return {};
  if (!n.grad_sink.empty()) return n.grad_sink;
  if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
  return n.grad;
}

template <class Real>
void Tape<Real>::backward(Var<Real> loss, std::vector<std::uint32_t>* visited) {
  if (loss.tape_ != this) throw std::invalid_argument("backward: loss belongs to a different tape");
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(root.shape));
  if (!root.requires_grad) return;
  auto g = grad_for(loss);
  g[0] += Real(1);
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
    if (visited) visited->push_back(static_cast<std::uint32_t>(i));
  }
}

template <class Real>
std::span<const Real> Tape<Real>::grad(Var<Real> v) const {
  const Node& n = nodes_[v.id()];
  if (!n.grad_sink.empty()) return n.grad_sink;
  return n.grad;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace hmem::numcore
