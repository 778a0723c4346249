#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hmem/model/config.hpp"
#include "hmem/model/transformer.hpp"

namespace hmem {
class BinaryWriter;
class BinaryReader;
}  // namespace hmem

namespace hmem::model {

void write_anchor(BinaryWriter& w, const AnchorConfig& a);
AnchorConfig read_anchor(BinaryReader& r);
void write_memory_config(BinaryWriter& w, const MemoryConfig& m);
MemoryConfig read_memory_config(BinaryReader& r);

struct CheckpointHeader {
  AnchorConfig arch;
  MemoryConfig mem;
  std::uint64_t step = 0;
  std::uint64_t config_digest = 0;
  std::uint64_t parent_digest = 0;
};

/// "HMCK" file: header, then the tensor table (name, shape, f32 data) in parameter order.
void write_model(std::ostream& out, const TransformerModel<float>& model, const CheckpointHeader& h);
TransformerModel<float> read_model(std::istream& in, CheckpointHeader* h = nullptr);

void save_model(const std::string& path, const TransformerModel<float>& model, const CheckpointHeader& h);
TransformerModel<float> load_model(const std::string& path, CheckpointHeader* h = nullptr);
CheckpointHeader read_model_header(const std::string& path);

}  // namespace hmem::model
