#include "oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace refcheck {

namespace {

double sqdist(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

using Mat = std::vector<double>;

// y[T, n] = x[T, m] * W[m, n]
Mat mm(const Mat& x, const Mat& W, std::size_t T, std::size_t m, std::size_t n) {
  Mat y(T * n, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) y[t * n + j] += x[t * m + i] * W[i * n + j];
  return y;
}

void add_to(Mat& y, const Mat& x, double s = 1.0) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

Mat rmsnorm(const Mat& x, const Mat& g, std::size_t T, std::size_t n, double eps) {
  Mat y(T * n);
  for (std::size_t t = 0; t < T; ++t) {
    double ms = 0;
    for (std::size_t i = 0; i < n; ++i) ms += x[t * n + i] * x[t * n + i];
    const double inv = 1.0 / std::sqrt(ms / n + eps);
    for (std::size_t i = 0; i < n; ++i) y[t * n + i] = x[t * n + i] * inv * g[i];
  }
  return y;
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

struct MemView {
  // sub-tensors per layer, keyed by name, one entry per non-empty level
  std::vector<std::vector<std::pair<std::string, Mat>>> per_layer;
  std::vector<Mat> find(std::size_t layer, const std::string& name) const {
    std::vector<Mat> out;
    if (layer >= per_layer.size()) return out;
    for (const auto& [n, m] : per_layer[layer])
      if (n == name) out.push_back(m);
    return out;
  }
};

MemView split_memory(const OracleWeights& w) {
  MemView mv;
  mv.per_layer.resize(w.layers);
  if (w.mem_type.empty()) return mv;
  const std::size_t D = w.d, HD = w.heads * w.head_dim, F = w.ffn;
  for (std::size_t lv = 0; lv < w.ranks.size(); ++lv) {
    const std::size_t r = w.ranks[lv];
    if (r == 0) continue;
    const auto& blk = w.mem_blocks.at(lv);
    std::size_t off = 0;
    for (auto layer : w.mem_layers) {
      auto take = [&](const char* name, std::size_t rows, std::size_t cols) {
        if (off + rows * cols > blk.size()) throw std::runtime_error("oracle: memory block too small");
        mv.per_layer[layer].push_back({name, Mat(blk.begin() + off, blk.begin() + off + rows * cols)});
        off += rows * cols;
      };
      if (w.mem_type == "ffn") {
        take("w1", D, r), take("w2", D, r), take("w3", r, D);
      } else if (w.mem_type == "lora_qk") {
        take("q_a", D, r), take("q_b", r, HD), take("k_a", D, r), take("k_b", r, HD);
      } else if (w.mem_type == "lora_ov") {
        take("v_a", D, r), take("v_b", r, HD), take("o_a", HD, r), take("o_b", r, D);
      } else if (w.mem_type == "lora_ffn") {
        take("f1_a", D, r), take("f1_b", r, F), take("f2_a", D, r), take("f2_b", r, F), take("f3_a", F, r),
            take("f3_b", r, D);
      } else if (w.mem_type == "kv") {
        take("kv_k", r, HD), take("kv_v", r, HD);
      } else {
        throw std::runtime_error("oracle: unknown memory type " + w.mem_type);
      }
    }
    if (off != blk.size()) throw std::runtime_error("oracle: memory block size mismatch");
  }
  return mv;
}

}  // namespace

OracleResult<std::vector<std::uint32_t>> oracle_kmeans(const std::vector<double>& points, std::size_t dim,
                                                       std::uint32_t k, std::size_t max_iter) {
  const std::size_t n = points.size() / dim;
  if (n < k) throw std::invalid_argument("oracle_kmeans: fewer points than clusters");
  std::vector<double> c(points.begin(), points.begin() + dim);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::uint32_t j = 1; j < k; ++j) {
    std::size_t far = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sqdist(&points[i * dim], &c[(j - 1) * dim], dim));
      if (nearest[i] > nearest[far]) far = i;
    }
    c.insert(c.end(), points.begin() + far * dim, points.begin() + (far + 1) * dim);
  }
  std::vector<std::uint32_t> a(n, k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      for (std::uint32_t j = 1; j < k; ++j)
        if (sqdist(&points[i * dim], &c[j * dim], dim) < sqdist(&points[i * dim], &c[best * dim], dim)) best = j;
      if (a[i] != best) a[i] = best, changed = true;
    }
    if (!changed) break;
    std::vector<double> sum(k * dim, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[a[i]];
      for (std::size_t d = 0; d < dim; ++d) sum[a[i] * dim + d] += points[i * dim + d];
    }
    for (std::uint32_t j = 0; j < k; ++j)
      if (cnt[j])
        for (std::size_t d = 0; d < dim; ++d) c[j * dim + d] = sum[j * dim + d] / cnt[j];
  }
  return {a, "lloyd full-batch, farthest-point seeding"};
}

OracleResult<std::vector<std::uint32_t>> oracle_nearest_leaf(const std::vector<double>& vec,
                                                             const std::vector<std::vector<double>>& centroids,
                                                             std::uint32_t k) {
  const std::size_t p = centroids.size(), dim = vec.size();
  std::size_t leaves = 1;
  for (std::size_t l = 0; l < p; ++l) leaves *= k;
  std::vector<std::uint32_t> found;
  for (std::size_t leaf = 1; leaf <= leaves; ++leaf) {
    std::vector<std::uint32_t> path(p);
    std::size_t id = leaf;
    for (std::size_t l = p; l-- > 0;) {
      path[l] = static_cast<std::uint32_t>(id);
      id = (id - 1) / k + 1;
    }
    bool ok = true;
    for (std::size_t l = 0; l < p && ok; ++l) {
      const std::size_t first = (path[l] - 1) / k * k + 1;  // first sibling
      const double mine = sqdist(vec.data(), &centroids[l][(path[l] - 1) * dim], dim);
      for (std::size_t s = first; s < first + k; ++s) {
        const double other = sqdist(vec.data(), &centroids[l][(s - 1) * dim], dim);
        if (other < mine || (other == mine && s < path[l])) ok = false;
      }
    }
    if (ok) {
      if (!found.empty()) throw std::logic_error("oracle_nearest_leaf: two valid paths");
      found = path;
    }
  }
  return {found, "exhaustive leaf enumeration"};
}

OracleResult<std::vector<double>> oracle_grad(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> params, double h) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x = params[i];
    params[i] = x + h;
    const double fp = f(params);
    params[i] = x - h;
    const double fm = f(params);
    params[i] = x;
    g[i] = (fp - fm) / (2 * h);
  }
  return {g, "central finite differences"};
}

OracleResult<std::vector<double>> oracle_forward(const std::vector<std::uint32_t>& tokens, const OracleWeights& w,
                                                 const std::vector<std::uint32_t>& doc_ids) {
  const std::size_t T = tokens.size(), D = w.d, H = w.heads, dh = w.head_dim, HD = H * dh, F = w.ffn, V = w.vocab;
  const MemView mem = split_memory(w);
  std::size_t total_rank = 0;
  for (auto r : w.ranks) total_rank += r;
  const double ls = total_rank ? w.lora_alpha / static_cast<double>(total_rank) : 0.0;

  auto lora = [&](Mat y, const Mat& x, std::size_t in, std::size_t out, std::size_t layer, const char* a,
                  const char* b) {
    const auto As = mem.find(layer, a), Bs = mem.find(layer, b);
    for (std::size_t i = 0; i < As.size(); ++i) {
      const std::size_t r = As[i].size() / in;
      add_to(y, mm(mm(x, As[i], T, in, r), Bs[i], T, r, out), ls);
    }
    return y;
  };
  auto rotate = [&](Mat& m) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < dh / 2; ++i) {
          const double ang = t * std::pow(w.rope_base, -2.0 * i / dh);
          double& a = m[t * HD + h * dh + 2 * i];
          double& b = m[t * HD + h * dh + 2 * i + 1];
          const double x0 = a, x1 = b;
          a = x0 * std::cos(ang) - x1 * std::sin(ang);
          b = x0 * std::sin(ang) + x1 * std::cos(ang);
        }
  };

  Mat x(T * D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < D; ++i) x[t * D + i] = w.tok_emb.at(tokens[t] * D + i);

  for (std::size_t l = 0; l < w.layers; ++l) {
    const auto& L = w.layer[l];
    Mat h = rmsnorm(x, L.attn_norm, T, D, w.eps);
    Mat q = lora(mm(h, L.wq, T, D, HD), h, D, HD, l, "q_a", "q_b");
    Mat k = lora(mm(h, L.wk, T, D, HD), h, D, HD, l, "k_a", "k_b");
    Mat v = lora(mm(h, L.wv, T, D, HD), h, D, HD, l, "v_a", "v_b");
    if (w.qk_norm) {
      q = rmsnorm(q, L.q_norm, T, HD, w.eps);
      k = rmsnorm(k, L.k_norm, T, HD, w.eps);
    }
    Mat qr = q, kr = k;
    rotate(qr);
    rotate(kr);
    const auto mk = mem.find(l, "kv_k"), mv = mem.find(l, "kv_v");
    Mat memk, memv;
    for (std::size_t i = 0; i < mk.size(); ++i) {
      memk.insert(memk.end(), mk[i].begin(), mk[i].end());
      memv.insert(memv.end(), mv[i].begin(), mv[i].end());
    }
    const std::size_t M = memk.size() / std::max<std::size_t>(HD, 1);
    Mat a(T * HD, 0.0);
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t hh = 0; hh < H; ++hh)
      for (std::size_t i = 0; i < T; ++i) {
        // self attention
        std::vector<double> s;
        std::vector<std::size_t> js;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!doc_ids.empty() && doc_ids[i] != doc_ids[j]) continue;
          double dot = 0;
          for (std::size_t e = 0; e < dh; ++e) dot += qr[i * HD + hh * dh + e] * kr[j * HD + hh * dh + e];
          s.push_back(dot * sc);
          js.push_back(j);
        }
        double mx = -std::numeric_limits<double>::infinity(), z = 0;
        for (double v2 : s) mx = std::max(mx, v2);
        for (double& v2 : s) z += (v2 = std::exp(v2 - mx));
        for (std::size_t n = 0; n < s.size(); ++n)
          for (std::size_t e = 0; e < dh; ++e) a[i * HD + hh * dh + e] += s[n] / z * v[js[n] * HD + hh * dh + e];
        // memory cross attention on the un-rotated query
        if (M) {
          std::vector<double> sm(M);
          mx = -std::numeric_limits<double>::infinity();
          for (std::size_t m = 0; m < M; ++m) {
            double dot = 0;
            for (std::size_t e = 0; e < dh; ++e) dot += q[i * HD + hh * dh + e] * memk[m * HD + hh * dh + e];
            sm[m] = dot * sc;
            mx = std::max(mx, sm[m]);
          }
          z = 0;
          for (double& v2 : sm) z += (v2 = std::exp(v2 - mx));
          for (std::size_t m = 0; m < M; ++m)
            for (std::size_t e = 0; e < dh; ++e) a[i * HD + hh * dh + e] += sm[m] / z * memv[m * HD + hh * dh + e];
        }
      }
    add_to(x, lora(mm(a, L.wo, T, HD, D), a, HD, D, l, "o_a", "o_b"));

    h = rmsnorm(x, L.ffn_norm, T, D, w.eps);
    Mat g1 = lora(mm(h, L.w1, T, D, F), h, D, F, l, "f1_a", "f1_b");
    Mat g2 = lora(mm(h, L.w2, T, D, F), h, D, F, l, "f2_a", "f2_b");
    Mat g(T * F);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = silu(g1[i]) * g2[i];
    Mat f = lora(mm(g, L.w3, T, F, D), g, F, D, l, "f3_a", "f3_b");
    const auto m1 = mem.find(l, "w1"), m2 = mem.find(l, "w2"), m3 = mem.find(l, "w3");
    for (std::size_t i = 0; i < m1.size(); ++i) {
      const std::size_t r = m1[i].size() / D;
      Mat u1 = mm(h, m1[i], T, D, r), u2 = mm(h, m2[i], T, D, r);
      for (std::size_t j = 0; j < u1.size(); ++j) u1[j] = silu(u1[j]) * u2[j];
      add_to(f, mm(u1, m3[i], T, r, D));
    }
    add_to(x, f);
  }
  x = rmsnorm(x, w.final_norm, T, D, w.eps);
  Mat out(T * V, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t v2 = 0; v2 < V; ++v2) {
      double s = 0;
      for (std::size_t i = 0; i < D; ++i) s += x[t * D + i] * (w.tied ? w.tok_emb[v2 * D + i] : w.head[i * V + v2]);
      out[t * V + v2] = s;
    }
  return {out, "direct loop evaluation"};
}

OracleResult<double> oracle_latency(const std::vector<std::uint64_t>& sizes, const std::vector<OracleTier>& level_tier,
                                    double bytes_per_param, bool parallel) {
  double total = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    if (sizes[l] == 0) continue;
    const double t = level_tier[l].latency + static_cast<double>(sizes[l]) * bytes_per_param / level_tier[l].bandwidth;
    total = parallel ? std::max(total, t) : total + t;
  }
  return {total, "explicit arithmetic"};
}

}  // namespace refcheck
