#include "hmem/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "hmem/common/binary_io.hpp"

namespace hmem::train {

void adamw_update(std::span<float> param, std::span<const float> grad, AdamState& st, double lr, double weight_decay,
                  const AdamWParams& hp, double grad_scale) {
  if (param.size() != grad.size()) throw std::invalid_argument("adamw_update: parameter and gradient sizes differ");
  if (!st.allocated()) {
    st.m.assign(param.size(), 0.0f);
    st.v.assign(param.size(), 0.0f);
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  const float b1 = static_cast<float>(hp.beta1), b2 = static_cast<float>(hp.beta2);
  const float step_size = static_cast<float>(lr / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(hp.eps);
  const float decay = static_cast<float>(decay_factor(lr, weight_decay));
  const float gs = static_cast<float>(grad_scale);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const float g = grad[i] * gs;
    st.m[i] = b1 * st.m[i] + (1.0f - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0f - b2) * g * g;
    param[i] = param[i] * decay - step_size * st.m[i] / (std::sqrt(st.v[i]) * inv_bc2 + eps);
  }
}

AdamState& SparseOptimizer::anchor(std::size_t i) {
  if (i >= anchor_.size()) anchor_.resize(i + 1);
  return anchor_[i];
}

namespace {

void write_state(BinaryWriter& w, const AdamState& s) {
  w.put<std::uint64_t>(s.step);
  w.put<std::uint64_t>(s.m.size());
  w.put_array(std::span<const float>(s.m));
  w.put_array(std::span<const float>(s.v));
}

void read_state(BinaryReader& r, AdamState& s) {
  s.step = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n > (1ull << 34)) throw FormatError("optimizer state: implausible tensor size");
  s.m.resize(n);
  s.v.resize(n);
  r.get_array(std::span<float>(s.m));
  r.get_array(std::span<float>(s.v));
}

}  // namespace

void SparseOptimizer::write(std::ostream& out) const {
  BinaryWriter w(out);
  w.put_bytes("HMOS");
  w.put<std::uint64_t>(anchor_.size());
  for (const auto& s : anchor_) write_state(w, s);
  w.put<std::uint64_t>(blocks_.size());
  for (const auto& [key, s] : blocks_) {
    w.put(key.first);
    w.put(key.second);
    write_state(w, s);
  }
  write_state(w, generic_);
}

void SparseOptimizer::read(std::istream& in) {
  BinaryReader r(in, "optimizer state");
  if (r.get_bytes(4) != "HMOS") throw FormatError("optimizer state: bad magic");
  anchor_.assign(r.get<std::uint64_t>(), AdamState{});
  for (auto& s : anchor_) read_state(r, s);
  blocks_.clear();
  const auto nb = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nb; ++i) {
    const auto l = r.get<std::uint32_t>();
    const auto id = r.get<std::uint32_t>();
    read_state(r, blocks_[{l, id}]);
  }
  read_state(r, generic_);
}

}  // namespace hmem::train
