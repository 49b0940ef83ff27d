#include "ces/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "ces/error.hpp"
#include "ces/io.hpp"

namespace ces {

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kCheckpointMagic, 4);
  binio::write_u32(out, kCheckpointFormatVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(ckpt.config.head_input_dim()));
  const nlohmann::json header = {{"config", to_json(ckpt.config)}, {"metadata", ckpt.metadata}};
  binio::write_bytes(out, header.dump());
  binio::write_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    binio::write_bytes(out, name);
    binio::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) binio::write_u32(out, static_cast<std::uint32_t>(d));
    binio::write_f32(out, t.data(), t.size());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, [&](std::ostream& out) { write_checkpoint(out, ckpt); }, true);
}

Checkpoint read_checkpoint(std::istream& in) {
  binio::Reader r(in, "checkpoint");
  char magic[4];
  r.read_raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw InputError("checkpoint: bad magic (expected CEMD)");
  const auto version = r.u32();
  if (version != kCheckpointFormatVersion) {
    throw InputError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.head_input_dim = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  if (!header.contains("config")) throw InputError("checkpoint: header lacks config");
  ckpt.config = model_config_from_json(header["config"]);
  if (header.contains("metadata")) ckpt.metadata = header["metadata"];
  if (ckpt.head_input_dim != ckpt.config.head_input_dim()) {
    throw InputError("checkpoint: header head width " + std::to_string(ckpt.head_input_dim) +
                     " disagrees with stored config");
  }
  const auto count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    auto name = r.bytes(1 << 12);
    const auto rank = r.u32();
    if (rank > 4) throw InputError("checkpoint: tensor " + name + " has implausible rank");
    nd::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
    if (nd::shape_size(shape) > (std::size_t{1} << 31)) {
      throw InputError("checkpoint: tensor " + name + " has implausible size");
    }
    nd::Tensor<float> t(shape);
    r.f32(t.data(), t.size());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.at_end()) throw InputError("checkpoint: trailing bytes");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  auto ckpt = read_checkpoint(in);
  if (expected != nullptr && !expected->same_architecture(ckpt.config)) {
    throw InputError("checkpoint " + path.string() + " was trained with a different model configuration: " +
                     to_json(ckpt.config).dump() + " vs requested " + to_json(*expected).dump());
  }
  return ckpt;
}

}  // namespace ces
