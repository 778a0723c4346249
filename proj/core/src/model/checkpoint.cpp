#include "hmem/model/checkpoint.hpp"

#include <fstream>

#include "hmem/common/binary_io.hpp"

namespace hmem::model {

namespace {
constexpr std::string_view kMagic = "HMCK";
constexpr std::uint32_t kVersion = 1;

CheckpointHeader read_header(BinaryReader& r) {
  if (r.get_bytes(4) != kMagic) throw FormatError("model checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("model checkpoint: unsupported version " + std::to_string(version));
  CheckpointHeader h;
  h.arch = read_anchor(r);
  h.mem = read_memory_config(r);
  h.step = r.get<std::uint64_t>();
  h.config_digest = r.get<std::uint64_t>();
  h.parent_digest = r.get<std::uint64_t>();
  return h;
}
}  // namespace

void write_anchor(BinaryWriter& w, const AnchorConfig& a) {
  for (std::uint32_t v : {a.layers, a.d, a.heads, a.head_dim, a.ffn_dim, a.vocab, a.context}) w.put(v);
  w.put<std::uint8_t>(a.tied_head);
  w.put<std::uint8_t>(a.qk_norm);
  w.put(a.rope_base);
  w.put(a.norm_eps);
}

AnchorConfig read_anchor(BinaryReader& r) {
  AnchorConfig a;
  for (std::uint32_t* v : {&a.layers, &a.d, &a.heads, &a.head_dim, &a.ffn_dim, &a.vocab, &a.context})
    *v = r.get<std::uint32_t>();
  a.tied_head = r.get<std::uint8_t>() != 0;
  a.qk_norm = r.get<std::uint8_t>() != 0;
  a.rope_base = r.get<double>();
  a.norm_eps = r.get<double>();
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid anchor config in file: ") + e.what());
  }
  return a;
}

void write_memory_config(BinaryWriter& w, const MemoryConfig& m) {
  w.put<std::uint32_t>(m.depth());
  for (auto r : m.multipliers) w.put(r);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.type));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.placement));
  w.put(m.lora_alpha);
}

MemoryConfig read_memory_config(BinaryReader& r) {
  MemoryConfig m;
  const auto p = r.get<std::uint32_t>();
  if (p > 64) throw FormatError("memory config: implausible depth " + std::to_string(p));
  m.multipliers.resize(p);
  for (auto& x : m.multipliers) x = r.get<std::uint32_t>();
  const auto t = r.get<std::uint8_t>();
  const auto pl = r.get<std::uint8_t>();
  if (t > static_cast<std::uint8_t>(MemType::KV) || pl > static_cast<std::uint8_t>(Placement::LATE))
    throw FormatError("memory config: bad enum value");
  m.type = static_cast<MemType>(t);
  m.placement = static_cast<Placement>(pl);
  m.lora_alpha = r.get<double>();
  return m;
}

void write_model(std::ostream& out, const TransformerModel<float>& model, const CheckpointHeader& h) {
  BinaryWriter w(out);
  w.put_bytes(kMagic);
  w.put(kVersion);
  write_anchor(w, model.arch());
  write_memory_config(w, model.memory_config());
  w.put(h.step);
  w.put(h.config_digest);
  w.put(h.parent_digest);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    w.put_string(p.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put_array(p.value.data());
  }
  if (!w.ok()) throw std::runtime_error("model checkpoint: write failed");
}

TransformerModel<float> read_model(std::istream& in, CheckpointHeader* out) {
  BinaryReader r(in, "model checkpoint");
  const auto h = read_header(r);
  TransformerModel<float> model(h.arch, h.mem);
  const auto n = r.get<std::uint32_t>();
  if (n != model.params().size())
    throw FormatError("model checkpoint: " + std::to_string(n) + " tensors, architecture has " +
                      std::to_string(model.params().size()));
  for (auto& p : model.params()) {
    const auto name = r.get_string(256);
    if (name != p.name) throw FormatError("model checkpoint: expected tensor " + p.name + ", found " + name);
    const auto rank = r.get<std::uint32_t>();
    numcore::Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (shape != p.value.shape())
      throw FormatError("model checkpoint: tensor " + name + " has shape " + numcore::shape_str(shape) +
                        ", expected " + numcore::shape_str(p.value.shape()));
    r.get_array(p.value.data());
  }
  if (out) *out = h;
  return model;
}

void save_model(const std::string& path, const TransformerModel<float>& model, const CheckpointHeader& h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  write_model(f, model, h);
  f.flush();
  if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

TransformerModel<float> load_model(const std::string& path, CheckpointHeader* h) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  return read_model(f, h);
}

CheckpointHeader read_model_header(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_model_header: cannot open " + path);
  BinaryReader r(f, "model checkpoint");
  return read_header(r);
}

}  // namespace hmem::model
