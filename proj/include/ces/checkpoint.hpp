#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ces/model_config.hpp"
#include "ces/nd/tensor.hpp"

namespace ces {

inline constexpr char kCheckpointMagic[4] = {'C', 'E', 'M', 'D'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

using NamedTensor = std::pair<std::string, nd::Tensor<float>>;

// Layout (little-endian):
//   "CEMD" | u32 version | u32 head input width |
//   u32 length + UTF-8 JSON {"config": ..., "metadata": ...} |
//   u32 tensor count | per tensor: u32 length + name, u32 rank, u32 dims..., float32 data
struct Checkpoint {
  ModelConfig config;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
  std::uint32_t head_input_dim = 0;  // as recorded in the header
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

Checkpoint read_checkpoint(std::istream& in);
// When `expected` is given, its architecture must match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace ces
