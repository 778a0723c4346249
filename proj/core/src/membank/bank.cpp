#include "hmem/membank/bank.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "hmem/common/digest.hpp"

namespace hmem::membank {

Accounting bank_accounting(const MemoryConfig& cfg, const AnchorConfig& arch, std::uint32_t k, std::uint32_t p) {
  if (cfg.depth() != p)
    throw std::invalid_argument("bank_accounting: " + std::to_string(cfg.depth()) + " multipliers for depth " +
                                std::to_string(p));
  Accounting a;
  std::uint64_t kl = 1;
  for (std::uint32_t l = 0; l < p; ++l) {
    kl *= k;
    const auto s = model::block_size(arch, cfg.type, cfg.placement, cfg.multipliers[l]);
    a.level_sizes.push_back(s);
    a.fetch_size += s;
    a.bank_size += s * kl;
  }
  return a;
}

bool BlockMask::blocked(std::uint32_t level, std::uint32_t id) const {
  for (std::uint32_t l = level; l >= 1; --l) {
    if (nodes_.count({l, id})) return true;
    id = cluster::parent_id(id, k_);
  }
  return false;
}

std::size_t FetchedMemory::total() const noexcept {
  std::size_t n = 0;
  for (auto b : blocks) n += b.size();
  return n;
}

MemoryBank::MemoryBank(AnchorConfig arch, MemoryConfig cfg, std::uint32_t k, bool allocate)
    : arch_(arch), cfg_(std::move(cfg)), k_(k) {
  arch_.validate();
  cfg_.validate();
  if (k == 0) throw std::invalid_argument("MemoryBank: k must be positive");
  acc_ = bank_accounting(cfg_, arch_, k_, cfg_.depth());
  levels_.resize(depth());
  present_.assign(depth(), false);
  counts_.resize(depth());
  std::size_t max_block = 0;
  for (auto s : acc_.level_sizes) max_block = std::max<std::size_t>(max_block, s);
  if (allocate) {
    layout_ = model::MemorySlotLayout::build(arch_, cfg_);
    zeros_.assign(max_block, 0.0f);
    for (std::uint32_t l = 1; l <= depth(); ++l) allocate_level(l);
    allocate_generic();
  }
}

std::size_t MemoryBank::generic_offset(std::uint32_t level) const {
  std::size_t off = 0;
  for (std::uint32_t l = 1; l < level; ++l) off += acc_.level_sizes[l - 1];
  return off;
}

void MemoryBank::allocate_level(std::uint32_t level) {
  if (layout_.levels.empty()) layout_ = model::MemorySlotLayout::build(arch_, cfg_);
  if (zeros_.empty())
    zeros_.assign(*std::max_element(acc_.level_sizes.begin(), acc_.level_sizes.end()), 0.0f);
  auto& lv = levels_.at(level - 1);
  lv.assign(block_size(level) * blocks_at(level), 0.0f);
  counts_[level - 1].assign(blocks_at(level), 0);
  present_[level - 1] = true;
}

void MemoryBank::allocate_generic() {
  if (layout_.levels.empty()) layout_ = model::MemorySlotLayout::build(arch_, cfg_);
  generic_.assign(acc_.fetch_size, 0.0f);
  generic_present_ = true;
}

void MemoryBank::drop_level(std::uint32_t level) {
  std::vector<float>().swap(levels_.at(level - 1));
  std::vector<std::uint64_t>().swap(counts_[level - 1]);
  present_[level - 1] = false;
}

std::span<const float> MemoryBank::level_data(std::uint32_t level) const {
  if (!level_present(level)) throw std::logic_error("memory bank: level " + std::to_string(level) + " is not loaded");
  return levels_[level - 1];
}

std::span<float> MemoryBank::level_data(std::uint32_t level) {
  if (!level_present(level)) throw std::logic_error("memory bank: level " + std::to_string(level) + " is not loaded");
  return levels_[level - 1];
}

std::span<const float> MemoryBank::block(std::uint32_t level, std::uint32_t id) const {
  if (id < 1 || id > blocks_at(level))
    throw std::out_of_range("memory bank: block " + std::to_string(id) + " outside level " + std::to_string(level));
  const auto s = block_size(level);
  return level_data(level).subspan(static_cast<std::size_t>(id - 1) * s, s);
}

std::span<float> MemoryBank::block(std::uint32_t level, std::uint32_t id) {
  auto c = std::as_const(*this).block(level, id);
  return {const_cast<float*>(c.data()), c.size()};
}

std::span<const float> MemoryBank::generic() const {
  if (!generic_present_) throw std::logic_error("memory bank: generic block is not loaded");
  return generic_;
}

std::span<float> MemoryBank::generic() {
  if (!generic_present_) throw std::logic_error("memory bank: generic block is not loaded");
  return generic_;
}

FetchedMemory MemoryBank::fetch(const ClusterIndex& idx, const BlockMask* mask, MaskPolicy policy) const {
  if (idx.size() != depth())
    throw std::invalid_argument("fetch: index has " + std::to_string(idx.size()) + " levels, bank has " +
                                std::to_string(depth()));
  FetchedMemory f;
  for (std::uint32_t l = 1; l <= depth(); ++l) {
    const auto s = block_size(l);
    BlockRef ref{l, 0, BlockRef::EMPTY};
    std::span<const float> b;
    if (s > 0) {
      if (mask && mask->blocked(l, idx[l - 1])) {
        if (policy == MaskPolicy::GENERIC) {
          b = generic_slice(l);
          ref.kind = BlockRef::GENERIC;
        } else {
          b = std::span<const float>(zeros_).first(s);
          ref.kind = BlockRef::ZERO;
        }
      } else {
        b = block(l, idx[l - 1]);
        ref = {l, idx[l - 1], BlockRef::CLUSTER};
      }
    }
    f.blocks.push_back(b);
    f.refs.push_back(ref);
  }
  return f;
}

FetchedMemory MemoryBank::fetch_generic() const {
  FetchedMemory f;
  for (std::uint32_t l = 1; l <= depth(); ++l) {
    const bool nonempty = block_size(l) > 0;
    f.blocks.push_back(nonempty ? generic_slice(l) : std::span<const float>{});
    f.refs.push_back({l, 0, nonempty ? BlockRef::GENERIC : BlockRef::EMPTY});
  }
  return f;
}

MemoryBank init_bank(const MemoryConfig& cfg, const AnchorConfig& arch, std::uint32_t k, std::uint64_t seed) {
  MemoryBank bank(arch, cfg, k);
  const auto& layout = bank.layout();
  for (std::uint32_t l = 1; l <= bank.depth(); ++l) {
    if (bank.block_size(l) == 0) continue;
    const auto& lv = layout.levels[l - 1];
    for (std::uint32_t id = 1; id <= bank.blocks_at(l); ++id) {
      std::mt19937_64 rng(derive_seed(seed, l, id));
      model::init_level_block(lv, bank.block(l, id), rng);
    }
    std::mt19937_64 rng(derive_seed(seed, l, 0));
    model::init_level_block(lv, bank.generic().subspan(bank.generic_offset(l), bank.block_size(l)), rng);
  }
  return bank;
}

std::uint64_t block_digest(std::span<const float> block) { return fnv1a64(std::as_bytes(block)); }

}  // namespace hmem::membank
