#include "ces/model_config.hpp"

#include <set>

#include "ces/error.hpp"

namespace ces {

namespace {

template <typename E>
E parse_enum(const nlohmann::json& j, std::string_view key, std::initializer_list<E> values) {
  const auto s = j.get<std::string>();
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  std::string allowed;
  for (E v : values) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(v));
  throw InputError("config key '" + std::string(key) + "': unknown value '" + s + "' (expected " + allowed + ")");
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("invalid model config: " + msg); };
  if (d_bert == 0) fail("d_bert must be positive");
  if (use_pos && d_pos == 0) fail("d_pos must be positive when use_pos is on");
  if (gnn_hidden == 0 || d_gnn == 0) fail("GNN dimensions must be positive");
  if (bilstm_out == 0 || bilstm_out % 2 != 0) fail("bilstm_out must be positive and even");
  if (num_classes != 5) fail("num_classes must be 5");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (max_seq_len == 0) fail("max_seq_len must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(base_lr > 0.0)) fail("base_lr must be positive");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  auto gnn_eq = [&] {
    if (!use_gnn) return true;
    return node_features == o.node_features && edge_direction == o.edge_direction && gnn_hidden == o.gnn_hidden &&
           d_gnn == o.d_gnn && use_bilstm == o.use_bilstm && (!use_bilstm || bilstm_out == o.bilstm_out);
  };
  return d_bert == o.d_bert && use_pos == o.use_pos && (!use_pos || d_pos == o.d_pos) && use_gnn == o.use_gnn &&
         num_classes == o.num_classes && project_embeddings == o.project_embeddings &&
         max_seq_len == o.max_seq_len && gnn_eq();
}

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> kVariants = {
      {"baseline", false, false, false, NodeFeatures::kFull},
      {"baseline-gnn-bilstm", false, true, true, NodeFeatures::kFull},
      {"baseline-pos", true, false, false, NodeFeatures::kFull},
      {"pos-gnn", true, true, false, NodeFeatures::kFull},
      {"pos-constgnn-bilstm", true, true, true, NodeFeatures::kConstantOne},
      {"proposed", true, true, true, NodeFeatures::kFull},
  };
  return kVariants;
}

const Variant& find_variant(std::string_view name) {
  for (const auto& v : ablation_variants()) {
    if (v.name == name) return v;
  }
  std::string known;
  for (const auto& v : ablation_variants()) known += (known.empty() ? "" : ", ") + v.name;
  throw InputError("unknown variant '" + std::string(name) + "' (known: " + known + ")");
}

ModelConfig apply_variant(ModelConfig c, const Variant& v) {
  c.use_pos = v.use_pos;
  c.use_gnn = v.use_gnn;
  c.use_bilstm = v.use_bilstm;
  c.node_features = v.node_features;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"d_bert", c.d_bert},
      {"d_pos", c.d_pos},
      {"gnn_hidden", c.gnn_hidden},
      {"d_gnn", c.d_gnn},
      {"bilstm_out", c.bilstm_out},
      {"num_classes", c.num_classes},
      {"dropout", c.dropout},
      {"max_seq_len", c.max_seq_len},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"base_lr", c.base_lr},
      {"use_pos", c.use_pos},
      {"use_gnn", c.use_gnn},
      {"use_bilstm", c.use_bilstm},
      {"node_features", to_string(c.node_features)},
      {"edge_direction", to_string(c.edge_direction)},
      {"dropout_scope", to_string(c.dropout_scope)},
      {"project_embeddings", c.project_embeddings},
      {"viterbi_granularity", to_string(c.viterbi_granularity)},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  if (!j.is_object()) throw InputError("model config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "d_bert") c.d_bert = v.get<std::size_t>();
      else if (key == "d_pos") c.d_pos = v.get<std::size_t>();
      else if (key == "gnn_hidden") c.gnn_hidden = v.get<std::size_t>();
      else if (key == "d_gnn") c.d_gnn = v.get<std::size_t>();
      else if (key == "bilstm_out") c.bilstm_out = v.get<std::size_t>();
      else if (key == "num_classes") c.num_classes = v.get<std::size_t>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "max_seq_len") c.max_seq_len = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "base_lr") c.base_lr = v.get<double>();
      else if (key == "use_pos") c.use_pos = v.get<bool>();
      else if (key == "use_gnn") c.use_gnn = v.get<bool>();
      else if (key == "use_bilstm") c.use_bilstm = v.get<bool>();
      else if (key == "node_features")
        c.node_features = parse_enum(v, key, {NodeFeatures::kFull, NodeFeatures::kConstantOne});
      else if (key == "edge_direction")
        c.edge_direction = parse_enum(v, key, {EdgeDirection::kHeadToTail, EdgeDirection::kTailToHead,
                                               EdgeDirection::kSymmetric});
      else if (key == "dropout_scope")
        c.dropout_scope = parse_enum(v, key, {DropoutScope::kEmbeddings, DropoutScope::kAll});
      else if (key == "project_embeddings") c.project_embeddings = v.get<bool>();
      else if (key == "viterbi_granularity")
        c.viterbi_granularity = parse_enum(v, key, {DecodeGranularity::kWord, DecodeGranularity::kToken});
      else throw InputError("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
  return c;
}

std::string_view to_string(NodeFeatures v) {
  return v == NodeFeatures::kFull ? "full" : "constant_one";
}

std::string_view to_string(EdgeDirection v) {
  switch (v) {
    case EdgeDirection::kHeadToTail: return "head_to_tail";
    case EdgeDirection::kTailToHead: return "tail_to_head";
    case EdgeDirection::kSymmetric: return "symmetric";
  }
  return "?";
}

std::string_view to_string(DropoutScope v) { return v == DropoutScope::kEmbeddings ? "embeddings" : "all"; }

std::string_view to_string(DecodeGranularity v) { return v == DecodeGranularity::kWord ? "word" : "token"; }

}  // namespace ces
