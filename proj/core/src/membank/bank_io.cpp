#include "hmem/membank/bank_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hmem/common/binary_io.hpp"
#include "hmem/model/checkpoint.hpp"

namespace hmem::membank {

namespace {

constexpr std::string_view kMagic = "HMBK";
constexpr std::uint32_t kVersion = 1;

// Range of blocks [first, last) at `level` stored in a file for `shard` (0 = all).
std::pair<std::uint64_t, std::uint64_t> block_range(std::uint32_t k, std::uint32_t level, std::uint32_t shard) {
  const std::uint64_t n = cluster::level_size(k, level);
  if (shard == 0) return {0, n};
  const std::uint64_t per = n / k;
  return {(shard - 1) * per, shard * per};
}

void write_header(BinaryWriter& w, const MemoryBank& bank, std::uint32_t shard, const std::vector<bool>& levels,
                  bool generic) {
  w.put_bytes(kMagic);
  w.put(kVersion);
  model::write_anchor(w, bank.arch());
  model::write_memory_config(w, bank.config());
  w.put<std::uint32_t>(bank.branching());
  w.put<std::uint32_t>(shard);
  w.put(bank.config_digest);
  w.put(bank.parent_digest);
  for (bool b : levels) w.put<std::uint8_t>(b);
  w.put<std::uint8_t>(generic);
}

BankFileInfo read_header(BinaryReader& r) {
  if (r.get_bytes(4) != kMagic) throw FormatError("memory bank: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("memory bank: unsupported version " + std::to_string(version));
  BankFileInfo info;
  info.arch = model::read_anchor(r);
  info.cfg = model::read_memory_config(r);
  info.k = r.get<std::uint32_t>();
  if (info.k == 0) throw FormatError("memory bank: k = 0");
  info.shard = r.get<std::uint32_t>();
  if (info.shard > info.k) throw FormatError("memory bank: shard id exceeds k");
  info.config_digest = r.get<std::uint64_t>();
  info.parent_digest = r.get<std::uint64_t>();
  info.levels_present.resize(info.cfg.depth());
  for (std::size_t l = 0; l < info.levels_present.size(); ++l) info.levels_present[l] = r.get<std::uint8_t>() != 0;
  info.generic_present = r.get<std::uint8_t>() != 0;
  return info;
}

void write_body(BinaryWriter& w, const MemoryBank& bank, std::uint32_t shard, const std::vector<bool>& levels,
                bool generic) {
  for (std::uint32_t l = 1; l <= bank.depth(); ++l) {
    if (!levels[l - 1]) continue;
    const auto [first, last] = block_range(bank.branching(), l, shard);
    const auto s = bank.block_size(l);
    w.put_array(bank.level_data(l).subspan(first * s, (last - first) * s));
    w.put_array(std::span<const std::uint64_t>(bank.update_counts(l)).subspan(first, last - first));
  }
  if (generic) {
    w.put_array(bank.generic());
    w.put<std::uint64_t>(bank.generic_updates());
  }
}

// Reads the body of a file described by `info` into `bank`, keeping levels in `keep`.
void read_body(BinaryReader& r, const BankFileInfo& info, MemoryBank& bank, const std::vector<bool>& keep) {
  for (std::uint32_t l = 1; l <= bank.depth(); ++l) {
    if (!info.levels_present[l - 1]) continue;
    const auto [first, last] = block_range(info.k, l, info.shard);
    const auto s = bank.block_size(l);
    if (!keep[l - 1]) {
      r.skip((last - first) * s * sizeof(float) + (last - first) * sizeof(std::uint64_t));
      continue;
    }
    if (!bank.level_present(l)) bank.allocate_level(l);
    r.get_array(bank.level_data(l).subspan(first * s, (last - first) * s));
    r.get_array(std::span<std::uint64_t>(bank.update_counts(l)).subspan(first, last - first));
  }
  if (info.generic_present) {
    bank.allocate_generic();
    r.get_array(bank.generic());
    bank.generic_updates() = r.get<std::uint64_t>();
  }
}

std::vector<bool> level_flags(const MemoryBank& bank, const std::optional<std::vector<std::uint32_t>>& levels) {
  std::vector<bool> out(bank.depth(), !levels.has_value());
  if (levels)
    for (auto l : *levels) {
      if (l < 1 || l > bank.depth()) throw std::invalid_argument("save_bank: no level " + std::to_string(l));
      out[l - 1] = true;
    }
  for (std::uint32_t l = 1; l <= bank.depth(); ++l) out[l - 1] = out[l - 1] && bank.level_present(l);
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + path);
}

bool same_config(const BankFileInfo& a, const BankFileInfo& b) {
  return a.arch.digest() == b.arch.digest() && a.cfg.digest() == b.cfg.digest() && a.k == b.k &&
         a.config_digest == b.config_digest && a.parent_digest == b.parent_digest;
}

}  // namespace

std::string serialize_bank(const MemoryBank& bank, const std::optional<std::vector<std::uint32_t>>& levels) {
  std::ostringstream os(std::ios::binary);
  BinaryWriter w(os);
  const auto flags = level_flags(bank, levels);
  const bool generic = !levels.has_value() && bank.generic_present();
  write_header(w, bank, 0, flags, generic);
  write_body(w, bank, 0, flags, generic);
  return os.str();
}

void save_bank(const MemoryBank& bank, const std::string& path,
               const std::optional<std::vector<std::uint32_t>>& levels) {
  write_file(path, serialize_bank(bank, levels));
}

BankFileInfo read_bank_info(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  BinaryReader r(f, "memory bank");
  return read_header(r);
}

namespace {

MemoryBank read_bank(std::istream& in, const std::string& name,
                     const std::optional<std::vector<std::uint32_t>>& levels, const AnchorConfig* expect_arch) {
  BinaryReader r(in, "memory bank");
  const auto info = read_header(r);
  if (info.shard != 0) throw FormatError("memory bank: " + name + " is a shard; merge shards instead");
  if (expect_arch && expect_arch->digest() != info.arch.digest())
    throw FormatError("memory bank: architecture in " + name + " does not match the requested anchor");
  MemoryBank bank(info.arch, info.cfg, info.k, false);
  bank.config_digest = info.config_digest;
  bank.parent_digest = info.parent_digest;
  std::vector<bool> keep(bank.depth(), !levels.has_value());
  if (levels)
    for (auto l : *levels) {
      if (l < 1 || l > bank.depth()) throw std::invalid_argument("load_bank: no level " + std::to_string(l));
      if (!info.levels_present[l - 1])
        throw FormatError("memory bank: level " + std::to_string(l) + " is not stored in " + name);
      keep[l - 1] = true;
    }
  read_body(r, info, bank, keep);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("memory bank: trailing bytes in " + name);
  return bank;
}

}  // namespace

MemoryBank load_bank(const std::string& path, const std::optional<std::vector<std::uint32_t>>& levels,
                     const AnchorConfig* expect_arch) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_bank(f, path, levels, expect_arch);
}

MemoryBank deserialize_bank(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_bank(in, "<memory>", std::nullopt, nullptr);
}

std::string shard_name(std::uint32_t subtree) { return "bank.l1-" + std::to_string(subtree) + ".shard"; }

void save_shard(const MemoryBank& bank, std::uint32_t subtree, const std::string& path) {
  if (subtree < 1 || subtree > bank.branching())
    throw std::invalid_argument("save_shard: subtree " + std::to_string(subtree) + " outside 1.." +
                                std::to_string(bank.branching()));
  std::ostringstream os(std::ios::binary);
  BinaryWriter w(os);
  const auto flags = level_flags(bank, std::nullopt);
  const bool generic = subtree == 1 && bank.generic_present();
  write_header(w, bank, subtree, flags, generic);
  write_body(w, bank, subtree, flags, generic);
  write_file(path, os.str());
}

MemoryBank merge_shards(const std::vector<std::string>& paths) {
  if (paths.empty()) throw FormatError("merge_shards: no shard files");
  std::optional<BankFileInfo> first;
  std::vector<std::string> owner;
  MemoryBank bank;
  for (const auto& path : paths) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    BinaryReader r(f, "memory bank shard");
    const auto info = read_header(r);
    if (info.shard == 0) throw FormatError("merge_shards: " + path + " is a full bank, not a shard");
    if (!first) {
      first = info;
      owner.assign(info.k, "");
      bank = MemoryBank(info.arch, info.cfg, info.k, false);
      bank.config_digest = info.config_digest;
      bank.parent_digest = info.parent_digest;
    } else if (!same_config(*first, info) || first->levels_present != info.levels_present) {
      throw FormatError("merge_shards: " + path + " was produced by a different configuration than " + paths[0]);
    }
    if (!owner[info.shard - 1].empty())
      throw FormatError("merge_shards: subtree " + std::to_string(info.shard) + " provided by both " +
                        owner[info.shard - 1] + " and " + path);
    owner[info.shard - 1] = path;
    read_body(r, info, bank, std::vector<bool>(bank.depth(), true));
  }
  for (std::uint32_t i = 0; i < owner.size(); ++i)
    if (owner[i].empty()) throw FormatError("merge_shards: no shard for subtree " + std::to_string(i + 1));
  return bank;
}

}  // namespace hmem::membank
