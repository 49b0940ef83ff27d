#include "ces/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ces/error.hpp"
#include "ces/io.hpp"

namespace ces {
namespace {

nlohmann::json run_keys(const RunConfig& c) {
  return {{"ablation", c.ablation},   {"dataset", c.dataset},     {"conllu", c.conllu},
          {"tokens", c.tokens},       {"embeddings", c.embeddings}, {"checkpoint", c.checkpoint},
          {"output", c.output},       {"gold", c.gold},           {"pred", c.pred},
          {"delimiter", c.delimiter}, {"doc_split", c.doc_split}, {"seed", c.seed},
          {"viterbi", c.viterbi},     {"seeds", c.seeds},         {"folds", c.folds},
          {"jobs", c.jobs},           {"variants", c.variants},   {"dims", c.dims},
          {"instances", c.instances}, {"tolerance", c.tolerance}, {"corrupt", c.corrupt},
          {"count", c.count}};
}

const nlohmann::json& model_defaults() {
  static const nlohmann::json j = to_json(ModelConfig{});
  return j;
}

const nlohmann::json& run_defaults() {
  static const nlohmann::json j = run_keys(RunConfig{});
  return j;
}

const nlohmann::json& unwrap(const nlohmann::json& layer) {
  if (layer.is_object() && layer.contains("command") && layer.contains("config")) return layer.at("config");
  return layer;
}

void check_layer(const nlohmann::json& layer, const char* what) {
  if (layer.is_null()) return;
  if (!layer.is_object()) throw InputError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : layer.items()) {
    if (!model_defaults().contains(key) && !run_defaults().contains(key)) {
      throw InputError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("config key '") + key + "' has the wrong type: " + j.at(key).dump());
  }
}

}  // namespace

std::string kebab_case(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

nlohmann::json to_json(const RunConfig& c) {
  auto j = run_keys(c);
  j.update(to_json(c.model));
  return j;
}

bool sets_model_keys(const nlohmann::json& file, const nlohmann::json& flags) {
  for (const auto* layer : {&unwrap(file), &flags}) {
    if (!layer->is_object()) continue;
    for (const auto& [key, v] : layer->items()) {
      if (model_defaults().contains(key)) return true;
      if (key == "ablation" && v.is_string() && !v.get<std::string>().empty()) return true;
    }
  }
  return false;
}

RunConfig resolve_run_config(const nlohmann::json& file_layer, const nlohmann::json& flags) {
  const auto& file = unwrap(file_layer);
  check_layer(file, "config file");
  check_layer(flags, "command line");
  nlohmann::json merged = run_defaults();
  nlohmann::json model_overrides = nlohmann::json::object();
  for (const auto* layer : {&file, &flags}) {
    if (!layer->is_object()) continue;
    for (const auto& [key, v] : layer->items()) {
      if (model_defaults().contains(key)) {
        model_overrides[key] = v;
      } else {
        merged[key] = v;
      }
    }
  }

  RunConfig c;
  take(merged, "ablation", c.ablation);
  take(merged, "dataset", c.dataset);
  take(merged, "conllu", c.conllu);
  take(merged, "tokens", c.tokens);
  take(merged, "embeddings", c.embeddings);
  take(merged, "checkpoint", c.checkpoint);
  take(merged, "output", c.output);
  take(merged, "gold", c.gold);
  take(merged, "pred", c.pred);
  take(merged, "delimiter", c.delimiter);
  take(merged, "doc_split", c.doc_split);
  take(merged, "seed", c.seed);
  take(merged, "viterbi", c.viterbi);
  take(merged, "seeds", c.seeds);
  take(merged, "folds", c.folds);
  take(merged, "jobs", c.jobs);
  take(merged, "variants", c.variants);
  take(merged, "dims", c.dims);
  take(merged, "instances", c.instances);
  take(merged, "tolerance", c.tolerance);
  take(merged, "corrupt", c.corrupt);
  take(merged, "count", c.count);

  if (c.delimiter.size() != 1) throw InputError("delimiter must be a single character");
  if (c.doc_split != "doc_id" && c.doc_split != "file") {
    throw InputError("doc_split must be 'doc_id' or 'file', got '" + c.doc_split + "'");
  }
  if (c.dims.size() != 3) throw InputError("dims expects three values: d_bert, gnn_hidden, d_gnn");

  ModelConfig base;
  if (!c.ablation.empty()) base = apply_variant(base, find_variant(c.ablation));
  try {
    c.model = model_config_from_json(model_overrides, base);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
  c.model.validate();
  return c;
}

nlohmann::json parse_flag_value(const std::string& key, const std::string& text) {
  const nlohmann::json* def = nullptr;
  if (model_defaults().contains(key)) def = &model_defaults().at(key);
  if (run_defaults().contains(key)) def = &run_defaults().at(key);
  if (def == nullptr) throw InputError("unknown option '" + key + "'");
  auto bad = [&]() -> InputError { return InputError("--" + kebab_case(key) + ": cannot parse '" + text + "'"); };
  auto scalar = [&](const nlohmann::json& like, const std::string& s) -> nlohmann::json {
    std::size_t used = 0;
    try {
      if (like.is_boolean()) {
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw bad();
      }
      if (like.is_number_unsigned() || like.is_number_integer()) {
        if (s.empty() || s[0] == '-') throw bad();
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw bad();
        return v;
      }
      if (like.is_number_float()) {
        const auto v = std::stod(s, &used);
        if (used != s.size()) throw bad();
        return v;
      }
    } catch (const std::logic_error&) {
      throw bad();
    }
    return s;
  };
  if (def->is_array()) {
    const nlohmann::json like = key == "variants" ? nlohmann::json("") : nlohmann::json(std::uint64_t{0});
    nlohmann::json out = nlohmann::json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(scalar(like, item));
    }
    return out;
  }
  return scalar(*def, text);
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config file " + path.string() + ": " + e.what());
  }
}

void check_inputs_exist(const std::map<std::string, std::string>& inputs) {
  std::string missing;
  for (const auto& [key, path] : inputs) {
    if (!path.empty() && !std::filesystem::exists(path)) missing += "\n  " + key + ": " + path;
  }
  if (!missing.empty()) throw InputError("input files not found:" + missing);
}

nlohmann::json run_manifest(const std::string& command, const RunConfig& config,
                            const std::map<std::string, std::string>& inputs) {
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [key, path] : inputs) {
    if (path.empty()) continue;
    in[key] = {{"path", path}, {"fnv1a64", file_digest(path)}};
  }
  return {{"command", command}, {"config", to_json(config)}, {"inputs", in}};
}

}  // namespace ces
