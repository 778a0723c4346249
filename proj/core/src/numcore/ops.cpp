#include "hmem/numcore/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace hmem::numcore {

namespace {

template <class R>
using RowMat = Eigen::Matrix<R, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class R>
using CMap = Eigen::Map<const RowMat<R>>;
template <class R>
using MMap = Eigen::Map<RowMat<R>>;
template <class R>
using CStrided = Eigen::Map<const RowMat<R>, 0, Eigen::OuterStride<>>;
template <class R>
using MStrided = Eigen::Map<RowMat<R>, 0, Eigen::OuterStride<>>;

// Eigen reductions peel to the first aligned element, so their summation
// order depends on the buffer address. This one does not.
template <class R>
R ordered_dot(const R* a, const R* b, std::size_t n) {
  R acc = 0;
  if (b)
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  else
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

template <class R>
CMap<R> cmap(std::span<const R> s, std::size_t rows, std::size_t cols) {
  return CMap<R>(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <class R>
MMap<R> mmap(std::span<R> s, std::size_t rows, std::size_t cols) {
  return MMap<R>(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_2d(const char* op, const Shape& s) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(s));
}

template <class R>
R sigmoid(R x) {
  return R(1) / (R(1) + std::exp(-x));
}

}  // namespace

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) throw_shape_error("matmul", sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<Real> out(m * n);
  mmap<Real>(out, m, n).noalias() = cmap<Real>(a.value(), m, k) * cmap<Real>(b.value(), k, n);
  return a.tape().record({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tape<Real>& t, std::span<const Real> g) {
    const auto G = cmap<Real>(g, m, n);
    if (auto ga = t.grad_for(a); !ga.empty())
      mmap<Real>(ga, m, k).noalias() += G * cmap<Real>(b.value(), k, n).transpose();
    if (auto gb = t.grad_for(b); !gb.empty())
      mmap<Real>(gb, k, n).noalias() += cmap<Real>(a.value(), m, k).transpose() * G;
  });
}

template <class Real>
Var<Real> matmul_nt(Var<Real> a, Var<Real> b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) throw_shape_error("matmul_nt", sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[0];
  std::vector<Real> out(m * n);
  mmap<Real>(out, m, n).noalias() = cmap<Real>(a.value(), m, k) * cmap<Real>(b.value(), n, k).transpose();
  return a.tape().record({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tape<Real>& t, std::span<const Real> g) {
    const auto G = cmap<Real>(g, m, n);
    if (auto ga = t.grad_for(a); !ga.empty()) mmap<Real>(ga, m, k).noalias() += G * cmap<Real>(b.value(), n, k);
    if (auto gb = t.grad_for(b); !gb.empty())
      mmap<Real>(gb, n, k).noalias() += G.transpose() * cmap<Real>(a.value(), m, k);
  });
}

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) throw_shape_error("add", a.shape(), b.shape());
  const auto va = a.value();
  const auto vb = b.value();
  std::vector<Real> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return a.tape().record(a.shape(), std::move(out), {a, b}, [a, b](Tape<Real>& t, std::span<const Real> g) {
    for (auto v : {a, b})
      if (auto gv = t.grad_for(v); !gv.empty())
        for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
  });
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) throw_shape_error("mul", a.shape(), b.shape());
  const auto va = a.value();
  const auto vb = b.value();
  std::vector<Real> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return a.tape().record(a.shape(), std::move(out), {a, b}, [a, b](Tape<Real>& t, std::span<const Real> g) {
    const auto va = a.value();
    const auto vb = b.value();
    if (auto ga = t.grad_for(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    if (auto gb = t.grad_for(b); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
  });
}

template <class Real>
Var<Real> scale(Var<Real> a, Real s) {
  const auto va = a.value();
  std::vector<Real> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * s;
  return a.tape().record(a.shape(), std::move(out), {a}, [a, s](Tape<Real>& t, std::span<const Real> g) {
    if (auto ga = t.grad_for(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <class Real>
Var<Real> silu(Var<Real> a) {
  using Arr = Eigen::Array<Real, Eigen::Dynamic, 1>;
  const auto va = a.value();
  const auto n = static_cast<Eigen::Index>(va.size());
  const Eigen::Map<const Arr> x(va.data(), n);
  // Vectorized exp and the scalar remainder differ in the last bit, so the split must
  // not depend on buffer addresses: evaluate into aligned storage only.
  auto sig = std::make_shared<Arr>(n);
  Arr& s = *sig;
  s = Real(1) / (Real(1) + (-x).exp());
  const Arr y = x * s;
  std::vector<Real> out(y.data(), y.data() + n);
  return a.tape().record(a.shape(), std::move(out), {a}, [a, sig, n](Tape<Real>& t, std::span<const Real> g) {
    auto ga = t.grad_for(a);
    const Eigen::Map<const Arr> x(a.value().data(), n), G(g.data(), n);
    const Arr& s = *sig;
    Eigen::Map<Arr>(ga.data(), n) += G * s * (Real(1) + x * (Real(1) - s));
  });
}

template <class Real>
Var<Real> softmax(Var<Real> a) {
  const auto& sh = a.shape();
  if (sh.empty()) throw ShapeError("softmax: scalar input");
  const std::size_t cols = sh.back();
  const std::size_t rows = cols ? a.value().size() / cols : 0;
  const auto va = a.value();
  auto out = std::make_shared<std::vector<Real>>(va.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* x = va.data() + r * cols;
    Real* y = out->data() + r * cols;
    const Real mx = *std::max_element(x, x + cols);
    Real z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  std::vector<Real> value = *out;
  return a.tape().record(sh, std::move(value), {a}, [a, out, rows, cols](Tape<Real>& t, std::span<const Real> g) {
    auto ga = t.grad_for(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* y = out->data() + r * cols;
      const Real* gy = g.data() + r * cols;
      Real dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += y[c] * (gy[c] - dot);
    }
  });
}

template <class Real>
Var<Real> rms_norm(Var<Real> x, Var<Real> gain, Real eps) {
  const auto& sx = x.shape();
  require_2d("rms_norm", sx);
  if (gain.shape() != Shape{sx[1]}) throw_shape_error("rms_norm", sx, gain.shape());
  const std::size_t rows = sx[0], cols = sx[1];
  const auto vx = x.value();
  const auto vg = gain.value();
  auto inv = std::make_shared<std::vector<Real>>(rows);
  std::vector<Real> out(vx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = vx.data() + r * cols;
    Real ms = 0;
    for (std::size_t c = 0; c < cols; ++c) ms += xr[c] * xr[c];
    ms /= static_cast<Real>(cols);
    const Real iv = Real(1) / std::sqrt(ms + eps);
    (*inv)[r] = iv;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xr[c] * iv * vg[c];
  }
  return x.tape().record(sx, std::move(out), {x, gain},
                         [x, gain, inv, rows, cols](Tape<Real>& t, std::span<const Real> g) {
                           const auto vx = x.value();
                           const auto vg = gain.value();
                           auto gx = t.grad_for(x);
                           auto gg = t.grad_for(gain);
                           for (std::size_t r = 0; r < rows; ++r) {
                             const Real iv = (*inv)[r];
                             const Real* xr = vx.data() + r * cols;
                             const Real* gr = g.data() + r * cols;
                             if (!gg.empty())
                               for (std::size_t c = 0; c < cols; ++c) gg[c] += gr[c] * xr[c] * iv;
                             if (gx.empty()) continue;
                             Real dot = 0;
                             for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * vg[c] * xr[c] * iv;
                             dot /= static_cast<Real>(cols);
                             for (std::size_t c = 0; c < cols; ++c)
                               gx[r * cols + c] += iv * (gr[c] * vg[c] - xr[c] * iv * dot);
                           }
                         });
}

template <class Real>
Var<Real> embedding(Var<Real> table, std::span<const std::uint32_t> ids) {
  const auto& st = table.shape();
  require_2d("embedding", st);
  const std::size_t vocab = st[0], d = st[1];
  const auto vt = table.value();
  std::vector<Real> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab)
      throw ShapeError("embedding: token id " + std::to_string(ids[i]) + " out of range for table " + shape_str(st));
    std::copy_n(vt.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::uint32_t> idv(ids.begin(), ids.end());
  return table.tape().record({ids.size(), d}, std::move(out), {table},
                             [table, idv = std::move(idv), d](Tape<Real>& t, std::span<const Real> g) {
                               auto gt = t.grad_for(table);
                               for (std::size_t i = 0; i < idv.size(); ++i) {
                                 Real* row = gt.data() + idv[i] * d;
                                 const Real* gr = g.data() + i * d;
                                 for (std::size_t c = 0; c < d; ++c) row[c] += gr[c];
                               }
                             });
}

template <class Real>
Var<Real> concat(std::span<const Var<Real>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  const Shape& s0 = parts[0].shape();
  require_2d("concat", s0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    require_2d("concat", s);
    if (s[1 - axis] != s0[1 - axis]) throw_shape_error("concat", s0, s);
    total += s[axis];
  }
  const Shape out_shape = axis == 0 ? Shape{total, s0[1]} : Shape{s0[0], total};
  const std::size_t out_cols = out_shape[1];
  std::vector<Real> out(numel(out_shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto v = p.value();
    const std::size_t r = p.shape()[0], c = p.shape()[1];
    if (axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offset * out_cols));
      offset += r;
    } else {
      for (std::size_t i = 0; i < r; ++i)
        std::copy_n(v.data() + i * c, c, out.data() + i * out_cols + offset);
      offset += c;
    }
  }
  std::vector<Var<Real>> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(out_shape, std::move(out), inputs,
                                [inputs, axis, out_cols](Tape<Real>& t, std::span<const Real> g) {
                                  std::size_t offset = 0;
                                  for (const auto& p : inputs) {
                                    const std::size_t r = p.shape()[0], c = p.shape()[1];
                                    auto gp = t.grad_for(p);
                                    if (!gp.empty()) {
                                      for (std::size_t i = 0; i < r; ++i)
                                        for (std::size_t j = 0; j < c; ++j)
                                          gp[i * c + j] += axis == 0 ? g[(offset + i) * out_cols + j]
                                                                     : g[i * out_cols + offset + j];
                                    }
                                    offset += axis == 0 ? r : c;
                                  }
                                });
}

template <class Real>
Var<Real> attention(Var<Real> q, Var<Real> k, Var<Real> v, const Tensor<Real>* mask, std::size_t heads) {
  const auto& sq = q.shape();
  const auto& sk = k.shape();
  const auto& sv = v.shape();
  require_2d("attention", sq);
  require_2d("attention", sk);
  if (sk != sv || sq[1] != sk[1]) throw_shape_error("attention", sq, sk);
  if (heads == 0 || sq[1] % heads != 0)
    throw ShapeError("attention: width " + std::to_string(sq[1]) + " not divisible by " + std::to_string(heads) +
                     " heads");
  const std::size_t tq = sq[0], tk = sk[0], width = sq[1], dh = width / heads;
  if (mask && mask->shape() != Shape{tq, tk}) throw_shape_error("attention(mask)", mask->shape(), Shape{tq, tk});
  const Real sc = Real(1) / std::sqrt(static_cast<Real>(dh));
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(width));
  const auto Tq = static_cast<Eigen::Index>(tq), Tk = static_cast<Eigen::Index>(tk), Dh = static_cast<Eigen::Index>(dh);

  auto probs = std::make_shared<std::vector<Real>>(heads * tq * tk);
  std::vector<Real> out(tq * width);
  for (std::size_t h = 0; h < heads; ++h) {
    // Owned copies are aligned, which keeps small products independent of where the
    // tape buffers happen to sit.
    const RowMat<Real> Q = CStrided<Real>(q.value().data() + h * dh, Tq, Dh, stride);
    const RowMat<Real> K = CStrided<Real>(k.value().data() + h * dh, Tk, Dh, stride);
    const RowMat<Real> V = CStrided<Real>(v.value().data() + h * dh, Tk, Dh, stride);
    RowMat<Real> P = (Q * K.transpose()) * sc;
    if (mask) P += cmap<Real>(mask->data(), tq, tk);
    for (Eigen::Index r = 0; r < Tq; ++r) {
      const Real mx = P.row(r).maxCoeff();
      if (!std::isfinite(mx)) throw std::domain_error("attention: a query row is fully masked");
      P.row(r) = (P.row(r).array() - mx).exp();
      P.row(r) /= ordered_dot<Real>(P.data() + r * Tk, nullptr, tk);
    }
    MMap<Real>(probs->data() + h * tq * tk, Tq, Tk) = P;
    const RowMat<Real> O = P * V;
    MStrided<Real>(out.data() + h * dh, Tq, Dh, stride) = O;
  }
  return q.tape().record(
      {tq, width}, std::move(out), {q, k, v},
      [q, k, v, probs, heads, tq, tk, width, dh, sc](Tape<Real>& t, std::span<const Real> g) {
        auto gq = t.grad_for(q);
        auto gk = t.grad_for(k);
        auto gv = t.grad_for(v);
        const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(width));
        const auto Tq = static_cast<Eigen::Index>(tq), Tk = static_cast<Eigen::Index>(tk),
                   Dh = static_cast<Eigen::Index>(dh);
        RowMat<Real> dP(Tq, Tk);
        for (std::size_t h = 0; h < heads; ++h) {
          const RowMat<Real> Q = CStrided<Real>(q.value().data() + h * dh, Tq, Dh, stride);
          const RowMat<Real> K = CStrided<Real>(k.value().data() + h * dh, Tk, Dh, stride);
          const RowMat<Real> V = CStrided<Real>(v.value().data() + h * dh, Tk, Dh, stride);
          const RowMat<Real> G = CStrided<Real>(g.data() + h * dh, Tq, Dh, stride);
          const RowMat<Real> P = CMap<Real>(probs->data() + h * tq * tk, Tq, Tk);
          if (!gv.empty()) {
            const RowMat<Real> d = P.transpose() * G;
            MStrided<Real>(gv.data() + h * dh, Tk, Dh, stride) += d;
          }
          if (gq.empty() && gk.empty()) continue;
          dP.noalias() = G * V.transpose();
          for (Eigen::Index r = 0; r < Tq; ++r) {
            const Real dot = ordered_dot<Real>(P.data() + r * Tk, dP.data() + r * Tk, tk);
            dP.row(r) = (P.row(r).array() * (dP.row(r).array() - dot)) * sc;
          }
          if (!gq.empty()) {
            const RowMat<Real> d = dP * K;
            MStrided<Real>(gq.data() + h * dh, Tq, Dh, stride) += d;
          }
          if (!gk.empty()) {
            const RowMat<Real> d = dP.transpose() * Q;
            MStrided<Real>(gk.data() + h * dh, Tk, Dh, stride) += d;
          }
        }
      });
}

template <class Real>
Var<Real> rope(Var<Real> x, std::span<const std::size_t> positions, std::size_t heads, double base) {
  const auto& sx = x.shape();
  require_2d("rope", sx);
  if (positions.size() != sx[0])
    throw ShapeError("rope: " + std::to_string(positions.size()) + " positions for input " + shape_str(sx));
  if (heads == 0 || sx[1] % heads != 0) throw ShapeError("rope: width not divisible by heads " + shape_str(sx));
  const std::size_t dh = sx[1] / heads;
  if (dh % 2 != 0) throw ShapeError("rope: head dim " + std::to_string(dh) + " is odd");
  const std::size_t half = dh / 2, rows = sx[0], width = sx[1];
  auto cs = std::make_shared<std::vector<Real>>(rows * half * 2);
  std::vector<double> freq(half);
  for (std::size_t i = 0; i < half; ++i) freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < half; ++i) {
      const double ang = static_cast<double>(positions[r]) * freq[i];
      (*cs)[(r * half + i) * 2] = static_cast<Real>(std::cos(ang));
      (*cs)[(r * half + i) * 2 + 1] = static_cast<Real>(std::sin(ang));
    }
  const auto vx = x.value();
  std::vector<Real> out(vx.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < half; ++i) {
        const std::size_t j = r * width + h * dh + 2 * i;
        const Real c = (*cs)[(r * half + i) * 2], s = (*cs)[(r * half + i) * 2 + 1];
        out[j] = vx[j] * c - vx[j + 1] * s;
        out[j + 1] = vx[j] * s + vx[j + 1] * c;
      }
  return x.tape().record(sx, std::move(out), {x}, [x, cs, rows, heads, half, dh, width](Tape<Real>& t,
                                                                                       std::span<const Real> g) {
    auto gx = t.grad_for(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < half; ++i) {
          const std::size_t j = r * width + h * dh + 2 * i;
          const Real c = (*cs)[(r * half + i) * 2], s = (*cs)[(r * half + i) * 2 + 1];
          gx[j] += g[j] * c + g[j + 1] * s;
          gx[j + 1] += -g[j] * s + g[j + 1] * c;
        }
  });
}

namespace {

template <class Real>
Var<Real> nll_impl(Var<Real> logits, std::span<const std::int32_t> targets, bool mean) {
  const auto& sl = logits.shape();
  require_2d("cross_entropy", sl);
  if (targets.size() != sl[0])
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " + shape_str(sl));
  const std::size_t rows = sl[0], vocab = sl[1];
  const auto vl = logits.value();
  auto lse = std::make_shared<std::vector<Real>>(rows, Real(0));
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= vocab)
      throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) + " out of range for " + shape_str(sl));
    const Real* x = vl.data() + r * vocab;
    const Real mx = *std::max_element(x, x + vocab);
    Real z = 0;
    for (std::size_t c = 0; c < vocab; ++c) z += std::exp(x[c] - mx);
    (*lse)[r] = mx + std::log(z);
    total += static_cast<double>((*lse)[r] - x[targets[r]]);
    ++count;
  }
  if (mean && count == 0) throw std::invalid_argument("cross_entropy: every target is ignored");
  const Real w = mean ? Real(1) / static_cast<Real>(count) : Real(1);
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return logits.tape().record(
      {1}, {static_cast<Real>(total) * w}, {logits},
      [logits, lse, tv = std::move(tv), rows, vocab, w](Tape<Real>& t, std::span<const Real> g) {
        auto gl = t.grad_for(logits);
        const auto vl = logits.value();
        const Real s = g[0] * w;
        for (std::size_t r = 0; r < rows; ++r) {
          if (tv[r] < 0) continue;
          const Real* x = vl.data() + r * vocab;
          Real* gr = gl.data() + r * vocab;
          for (std::size_t c = 0; c < vocab; ++c) gr[c] += s * std::exp(x[c] - (*lse)[r]);
          gr[tv[r]] -= s;
        }
      });
}

}  // namespace

template <class Real>
Var<Real> nll_sum(Var<Real> logits, std::span<const std::int32_t> targets) {
  return nll_impl(logits, targets, false);
}

template <class Real>
Var<Real> cross_entropy(Var<Real> logits, std::span<const std::int32_t> targets) {
  return nll_impl(logits, targets, true);
}

#define HMEM_INSTANTIATE_OPS(R)                                                                      \
  template Var<R> matmul(Var<R>, Var<R>);                                                            \
  template Var<R> matmul_nt(Var<R>, Var<R>);                                                         \
  template Var<R> add(Var<R>, Var<R>);                                                               \
  template Var<R> mul(Var<R>, Var<R>);                                                               \
  template Var<R> scale(Var<R>, R);                                                                  \
  template Var<R> silu(Var<R>);                                                                      \
  template Var<R> softmax(Var<R>);                                                                   \
  template Var<R> rms_norm(Var<R>, Var<R>, R);                                                       \
  template Var<R> embedding(Var<R>, std::span<const std::uint32_t>);                                 \
  template Var<R> concat(std::span<const Var<R>>, std::size_t);                                      \
  template Var<R> attention(Var<R>, Var<R>, Var<R>, const Tensor<R>*, std::size_t);                  \
  template Var<R> rope(Var<R>, std::span<const std::size_t>, std::size_t, double);                   \
  template Var<R> nll_sum(Var<R>, std::span<const std::int32_t>);                                    \
  template Var<R> cross_entropy(Var<R>, std::span<const std::int32_t>);

HMEM_INSTANTIATE_OPS(float)
HMEM_INSTANTIATE_OPS(double)

}  // namespace hmem::numcore
