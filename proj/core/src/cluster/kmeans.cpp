#include "hmem/cluster/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"

namespace hmem::cluster {

void ClusterTrainConfig::validate(std::uint32_t k) const {
  if (steps == 0) throw ConfigError("cluster.steps", "must be positive");
  if (batch_per_step == 0) throw ConfigError("cluster.batch_per_step", "must be positive");
  if (k == 0) throw ConfigError("cluster.k", "must be positive");
  if (!(balance_limit >= 1.0 / k - 1e-12) || balance_limit > 1.0)
    throw ConfigError("cluster.balance_limit",
                      "must lie in [1/k, 1] = [" + std::to_string(1.0 / k) + ", 1], got " + std::to_string(balance_limit));
}

std::uint64_t ClusterTrainConfig::digest() const {
  Fnv1a64 h;
  h.update("cluster-train");
  h.update_pod(static_cast<std::uint64_t>(steps));
  h.update_pod(static_cast<std::uint64_t>(batch_per_step));
  h.update_pod(balance_limit);
  h.update_pod(seed);
  return h.value();
}

std::size_t balance_split(std::vector<std::uint32_t>& assign, std::vector<std::size_t>& sizes, double limit,
                          std::mt19937_64& rng) {
  std::fill(sizes.begin(), sizes.end(), 0);
  for (auto a : assign) ++sizes[a];
  const double n = static_cast<double>(assign.size());
  std::size_t splits = 0;
  std::vector<std::size_t> members;
  while (true) {
    const auto big = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    const auto small = static_cast<std::uint32_t>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (static_cast<double>(sizes[big]) <= limit * n) break;
    const std::size_t half = sizes[big] / 2;
    // Stop once a split would no longer shrink the largest cluster.
    if (big == small || sizes[small] + half >= sizes[big]) break;
    members.clear();
    for (std::size_t i = 0; i < assign.size(); ++i)
      if (assign[i] == big) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < half; ++j) assign[members[j]] = small;
    sizes[big] -= half;
    sizes[small] += half;
    ++splits;
  }
  return splits;
}

namespace {

std::size_t nearest(std::span<const float> x, const std::vector<float>& cent, std::size_t dim, std::uint32_t k,
                    double* dist = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < k; ++j) {
    const double d = squared_l2(x, std::span<const float>(cent).subspan(j * dim, dim));
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  if (dist) *dist = bd;
  return best;
}

std::size_t count_distinct(std::span<const float> points, std::size_t dim, std::size_t cap) {
  std::set<std::vector<float>> seen;
  for (std::size_t i = 0; i * dim < points.size() && seen.size() < cap; ++i)
    seen.emplace(points.begin() + static_cast<std::ptrdiff_t>(i * dim),
                 points.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  return seen.size();
}

std::vector<float> kmeanspp(std::span<const float> points, const std::vector<std::size_t>& pool, std::size_t dim,
                            std::uint32_t k, std::mt19937_64& rng) {
  std::vector<float> cent(static_cast<std::size_t>(k) * dim);
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::size_t first = pool[pick(rng)];
  std::copy_n(row(first).begin(), dim, cent.begin());
  std::vector<double> d2(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) d2[i] = squared_l2(row(pool[i]), row(first));
  for (std::uint32_t j = 1; j < k; ++j) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double t = u(rng);
      for (chosen = 0; chosen + 1 < pool.size(); ++chosen) {
        if (t < d2[chosen]) break;
        t -= d2[chosen];
      }
      while (d2[chosen] == 0 && chosen > 0) --chosen;  // land on a point with positive weight
    }
    const auto c = row(pool[chosen]);
    std::copy_n(c.begin(), dim, cent.begin() + static_cast<std::ptrdiff_t>(j * dim));
    for (std::size_t i = 0; i < pool.size(); ++i) d2[i] = std::min(d2[i], squared_l2(row(pool[i]), c));
  }
  return cent;
}

}  // namespace

std::vector<float> balanced_kmeans(std::span<const float> points, std::size_t dim, std::uint32_t k,
                                   const ClusterTrainConfig& cfg, std::uint64_t seed, std::uint32_t level,
                                   std::uint32_t node, std::vector<std::uint64_t>* counts, TrainLog* log) {
  const std::size_t n = dim ? points.size() / dim : 0;
  const std::size_t distinct = count_distinct(points, dim, k);
  if (distinct < k)
    throw ClusterError(level, node,
                       "has " + std::to_string(distinct) + " distinct vectors, fewer than k = " + std::to_string(k));
  std::mt19937_64 rng(seed);
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto sample_batch = [&]() {
    if (n <= cfg.batch_per_step) return all;
    std::vector<std::size_t> idx = all;
    for (std::size_t i = 0; i < cfg.batch_per_step; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, n - 1);
      std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(cfg.batch_per_step);
    return idx;
  };

  std::vector<float> cent;
  {
    // k-means++ needs k distinct seeds; fall back to all points if the first batch lacks them.
    auto pool = sample_batch();
    std::vector<float> pool_pts;
    for (auto i : pool) pool_pts.insert(pool_pts.end(), row(i).begin(), row(i).end());
    if (count_distinct(pool_pts, dim, k) < k) pool = all;
    cent = kmeanspp(points, pool, dim, k, rng);
  }

  std::vector<std::uint64_t> cumulative(k, 0);
  std::vector<std::size_t> sizes(k);
  std::vector<std::uint32_t> assign;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = step == 0 && n <= cfg.batch_per_step ? all : sample_batch();
    assign.assign(batch.size(), 0);
    for (std::size_t b = 0; b < batch.size(); ++b)
      assign[b] = static_cast<std::uint32_t>(nearest(row(batch[b]), cent, dim, k));
    const std::size_t splits = balance_split(assign, sizes, cfg.balance_limit, rng);

    // Reseed empty clusters from the point farthest from its centroid in the largest cluster.
    for (std::uint32_t j = 0; j < k; ++j) {
      if (sizes[j] != 0) continue;
      const auto big = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[big] < 2) break;
      std::size_t far = 0;
      double fd = -1;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (assign[b] != big) continue;
        const double d = squared_l2(row(batch[b]), std::span<const float>(cent).subspan(big * dim, dim));
        if (d > fd) {
          fd = d;
          far = b;
        }
      }
      assign[far] = j;
      --sizes[big];
      ++sizes[j];
    }

    std::vector<double> acc(static_cast<std::size_t>(k) * dim, 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto x = row(batch[b]);
      for (std::size_t c = 0; c < dim; ++c) acc[assign[b] * dim + c] += x[c];
    }
    for (std::uint32_t j = 0; j < k; ++j) {
      if (sizes[j] == 0) continue;
      for (std::size_t c = 0; c < dim; ++c)
        cent[j * dim + c] = static_cast<float>(acc[j * dim + c] / static_cast<double>(sizes[j]));
    }

    for (std::uint32_t j = 0; j < k; ++j) cumulative[j] += sizes[j];
    if (log) {
      BalanceEvent ev;
      ev.level = level;
      ev.node = node;
      ev.step = step;
      ev.batch = batch.size();
      ev.splits = splits;
      const double bn = static_cast<double>(batch.size());
      ev.max_fraction = static_cast<double>(*std::max_element(sizes.begin(), sizes.end())) / bn;
      const double total = static_cast<double>(std::accumulate(cumulative.begin(), cumulative.end(), std::uint64_t{0}));
      ev.max_cumulative = static_cast<double>(*std::max_element(cumulative.begin(), cumulative.end())) / total;
      log->events.push_back(ev);
    }
  }
  if (counts) *counts = cumulative;
  return cent;
}

ClusterTree train_tree(std::span<const float> points, std::size_t dim, std::uint32_t p, std::uint32_t k,
                       const ClusterTrainConfig& cfg, TrainLog* log) {
  cfg.validate(k);
  if (dim == 0 || points.size() % dim != 0)
    throw std::invalid_argument("train_tree: point buffer is not a multiple of dim " + std::to_string(dim));
  const std::size_t n = points.size() / dim;
  std::vector<float> unit(points.begin(), points.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < dim; ++c) s += static_cast<double>(unit[i * dim + c]) * unit[i * dim + c];
    if (s == 0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t c = 0; c < dim; ++c) unit[i * dim + c] = static_cast<float>(unit[i * dim + c] * inv);
  }

  ClusterTree tree(p, k, static_cast<std::uint32_t>(dim));
  // node_of[i]: id of point i at the deepest trained level (1 = root before level 1).
  std::vector<std::uint32_t> node_of(n, 1);
  for (std::uint32_t l = 1; l <= p; ++l) {
    const auto parents = static_cast<std::uint32_t>(tree.nodes_at(l - 1));
    std::vector<std::vector<std::size_t>> members(parents);
    for (std::size_t i = 0; i < n; ++i) members[node_of[i] - 1].push_back(i);
    for (std::uint32_t j = 1; j <= parents; ++j) {
      std::vector<float> sub;
      sub.reserve(members[j - 1].size() * dim);
      for (auto i : members[j - 1])
        sub.insert(sub.end(), unit.begin() + static_cast<std::ptrdiff_t>(i * dim),
                   unit.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
      std::vector<std::uint64_t> counts;
      const auto cent = balanced_kmeans(sub, dim, k, cfg, derive_seed(cfg.seed, l, j), l - 1, j, &counts, log);
      const std::uint32_t first = (j - 1) * k + 1;
      for (std::uint32_t c = 0; c < k; ++c) {
        auto dst = tree.centroid(l, first + c);
        std::copy_n(cent.begin() + static_cast<std::ptrdiff_t>(c * dim), dim, dst.begin());
        tree.level_counts(l)[first - 1 + c] = counts[c];
      }
    }
    // Route every point one level deeper through the now frozen level l.
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = std::span<const float>(unit).subspan(i * dim, dim);
      const std::uint32_t first = (node_of[i] - 1) * k + 1;
      std::uint32_t best = first;
      double bd = std::numeric_limits<double>::infinity();
      for (std::uint32_t c = 0; c < k; ++c) {
        const double d = squared_l2(x, tree.centroid(l, first + c));
        if (d < bd) {
          bd = d;
          best = first + c;
        }
      }
      node_of[i] = best;
    }
  }
  return tree;
}

}  // namespace hmem::cluster
