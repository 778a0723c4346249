#include "hmem/cluster/tree.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "hmem/common/binary_io.hpp"

namespace hmem::cluster {

namespace {
constexpr char kMagic[4] = {'H', 'M', 'C', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint64_t level_size(std::uint32_t k, std::uint32_t level) {
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < level; ++i) {
    n *= k;
    if (n > std::numeric_limits<std::uint32_t>::max())
      throw std::overflow_error("level_size: k^" + std::to_string(level) + " exceeds 2^32");
  }
  return n;
}

bool nested_consistent(const ClusterIndex& idx, std::uint32_t k) {
  for (std::size_t l = 0; l < idx.size(); ++l) {
    if (idx[l] < 1 || idx[l] > level_size(k, static_cast<std::uint32_t>(l + 1))) return false;
    if (l > 0 && parent_id(idx[l], k) != idx[l - 1]) return false;
  }
  return true;
}

ClusterIndex index_from_leaf(std::uint32_t leaf, std::uint32_t k, std::uint32_t p) {
  ClusterIndex idx(p);
  std::uint32_t id = leaf;
  for (std::uint32_t l = p; l > 0; --l) {
    idx[l - 1] = id;
    id = parent_id(id, k);
  }
  return idx;
}

ClusterTree::ClusterTree(std::uint32_t p, std::uint32_t k, std::uint32_t c) : p_(p), k_(k), c_(c) {
  if (k == 0 || c == 0) throw std::invalid_argument("ClusterTree: k and c must be positive");
  for (std::uint32_t l = 1; l <= p; ++l) {
    const auto n = level_size(k, l);
    centroids_.emplace_back(n * c, 0.0f);
    counts_.emplace_back(n, 0);
  }
}

std::span<const float> ClusterTree::centroid(std::uint32_t level, std::uint32_t id) const {
  const auto& lv = centroids_.at(level - 1);
  if (id < 1 || static_cast<std::uint64_t>(id) * c_ > lv.size())
    throw std::out_of_range("ClusterTree: node " + std::to_string(id) + " outside level " + std::to_string(level));
  return std::span<const float>(lv).subspan(static_cast<std::size_t>(id - 1) * c_, c_);
}

std::span<float> ClusterTree::centroid(std::uint32_t level, std::uint32_t id) {
  auto s = std::as_const(*this).centroid(level, id);
  return {const_cast<float*>(s.data()), s.size()};
}

double squared_l2(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

ClusterIndex ClusterTree::assign(std::span<const float> vec, std::uint64_t* comparisons) const {
  if (vec.size() != c_)
    throw std::invalid_argument("assign: vector dim " + std::to_string(vec.size()) + " does not match tree dim " +
                                std::to_string(c_));
  ClusterIndex idx(p_);
  std::uint32_t node = 1;
  for (std::uint32_t l = 1; l <= p_; ++l) {
    const std::uint32_t first = (node - 1) * k_ + 1;
    std::uint32_t best = first;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t j = 0; j < k_; ++j) {
      const double d = squared_l2(vec, centroid(l, first + j));
      if (comparisons) ++*comparisons;
      if (d < best_d) {
        best_d = d;
        best = first + j;
      }
    }
    idx[l - 1] = node = best;
  }
  return idx;
}

std::string serialize_tree(const ClusterTree& tree) {
  std::ostringstream os(std::ios::binary);
  BinaryWriter w(os);
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(tree.depth());
  w.put<std::uint32_t>(tree.branching());
  w.put<std::uint32_t>(tree.dim());
  w.put<std::uint64_t>(tree.config_digest);
  w.put<std::uint64_t>(tree.parent_digest);
  for (std::uint32_t l = 1; l <= tree.depth(); ++l) w.put_array(tree.level_centroids(l));
  for (std::uint32_t l = 1; l <= tree.depth(); ++l) w.put_array(std::span<const std::uint64_t>(tree.level_counts(l)));
  return os.str();
}

ClusterTree deserialize_tree(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  BinaryReader r(is, "cluster tree");
  if (r.get_bytes(4) != std::string_view(kMagic, 4)) throw FormatError("cluster tree: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("cluster tree: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
  const auto p = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  const auto c = r.get<std::uint32_t>();
  if (k == 0 || c == 0 || p > 16) throw FormatError("cluster tree: invalid header");
  std::uint64_t total = 0;
  for (std::uint32_t l = 1; l <= p; ++l) total += level_size(k, l);
  if (total * c * 4 > bytes.size()) throw FormatError("cluster tree: truncated");
  ClusterTree tree(p, k, c);
  tree.config_digest = r.get<std::uint64_t>();
  tree.parent_digest = r.get<std::uint64_t>();
  for (std::uint32_t l = 1; l <= p; ++l) {
    auto lv = tree.level_centroids(l);
    r.get_array(std::span<float>(const_cast<float*>(lv.data()), lv.size()));
  }
  for (std::uint32_t l = 1; l <= p; ++l) r.get_array(std::span<std::uint64_t>(tree.level_counts(l)));
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("cluster tree: trailing bytes");
  return tree;
}

void save_tree(const ClusterTree& tree, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_tree: cannot open " + path);
  const auto bytes = serialize_tree(tree);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("save_tree: write failed for " + path);
}

ClusterTree load_tree(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_tree: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_tree(ss.str());
}

}  // namespace hmem::cluster
