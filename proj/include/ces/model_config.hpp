#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ces {

enum class NodeFeatures { kFull, kConstantOne };
enum class EdgeDirection { kHeadToTail, kTailToHead, kSymmetric };
enum class DropoutScope { kEmbeddings, kAll };
enum class DecodeGranularity { kWord, kToken };

// Architecture and optimization constants. Defaults are the reference
// configuration (base-size encoder).
struct ModelConfig {
  std::size_t d_bert = 768;
  std::size_t d_pos = 51;
  std::size_t gnn_hidden = 1024;
  std::size_t d_gnn = 512;
  std::size_t bilstm_out = 512;
  std::size_t num_classes = 5;
  double dropout = 0.1;
  std::size_t max_seq_len = 350;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  double base_lr = 2e-5;

  bool use_pos = true;
  bool use_gnn = true;
  bool use_bilstm = true;
  NodeFeatures node_features = NodeFeatures::kFull;
  EdgeDirection edge_direction = EdgeDirection::kHeadToTail;
  DropoutScope dropout_scope = DropoutScope::kEmbeddings;
  // Trainable d_bert×d_bert map on the frozen embeddings, identity-initialized.
  bool project_embeddings = false;
  DecodeGranularity viterbi_granularity = DecodeGranularity::kWord;

  // Width of [r̃ ‖ v]: contextual features plus the optional POS block.
  std::size_t token_feature_dim() const { return d_bert + (use_pos ? d_pos : 0); }
  std::size_t gnn_input_dim() const {
    return node_features == NodeFeatures::kConstantOne ? 1 : token_feature_dim();
  }
  std::size_t gnn_output_dim() const { return use_bilstm ? bilstm_out : d_gnn; }
  std::size_t head_input_dim() const { return token_feature_dim() + (use_gnn ? gnn_output_dim() : 0); }

  // Throws InputError on inconsistent values.
  void validate() const;

  // True when both configs produce identically shaped parameters and the
  // same forward computation.
  bool same_architecture(const ModelConfig& other) const;

  bool operator==(const ModelConfig&) const = default;
};

// Named ablation presets (use_pos, use_gnn, use_bilstm, node_features).
struct Variant {
  std::string name;
  bool use_pos;
  bool use_gnn;
  bool use_bilstm;
  NodeFeatures node_features;
};

const std::vector<Variant>& ablation_variants();
const Variant& find_variant(std::string_view name);
ModelConfig apply_variant(ModelConfig config, const Variant& v);

nlohmann::json to_json(const ModelConfig& c);
// Starts from `base` and overrides the keys present in `j`; unknown keys are
// rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

std::string_view to_string(NodeFeatures v);
std::string_view to_string(EdgeDirection v);
std::string_view to_string(DropoutScope v);
std::string_view to_string(DecodeGranularity v);

}  // namespace ces
