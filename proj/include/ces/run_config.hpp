#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ces/model_config.hpp"

namespace ces {

inline constexpr std::uint64_t kDefaultRunSeed = 123;

// Everything a command needs: model hyperparameters plus paths and
// command options. Serialized as one flat JSON object whose keys double as
// kebab-case command-line flags.
struct RunConfig {
  ModelConfig model;
  std::string ablation;  // variant preset applied beneath explicit model keys

  std::string dataset;
  std::string conllu;
  std::string tokens;
  std::string embeddings;  // empty = hashed stand-in vectors of width d_bert
  std::string checkpoint;
  std::string output;
  std::string gold;
  std::string pred;
  std::string delimiter = ";";
  std::string doc_split = "doc_id";  // "doc_id" or "file"

  std::uint64_t seed = kDefaultRunSeed;
  bool viterbi = true;

  std::vector<std::uint64_t> seeds{916, 703, 443, 229, 585};
  std::size_t folds = 3;
  std::size_t jobs = 1;
  std::vector<std::string> variants;

  std::vector<std::size_t> dims{8, 6, 4};
  std::size_t instances = 20;
  double tolerance = 1e-4;
  bool corrupt = false;

  std::size_t count = 50;
};

nlohmann::json to_json(const RunConfig& c);

// Layers `file` and then `flags` (flat objects) over the defaults. Model
// keys override the ablation preset. Unknown keys are rejected. A run
// manifest ({"command", "config", ...}) is accepted as a file layer.
RunConfig resolve_run_config(const nlohmann::json& file, const nlohmann::json& flags);

// True when `file` or `flags` set any model key or an ablation.
bool sets_model_keys(const nlohmann::json& file, const nlohmann::json& flags);

// Converts a flag string to the JSON type of `key`'s default value.
nlohmann::json parse_flag_value(const std::string& key, const std::string& text);

// Reads a JSON config file (or manifest).
nlohmann::json read_config_file(const std::filesystem::path& path);

// Throws one InputError naming every non-empty input path that is missing.
void check_inputs_exist(const std::map<std::string, std::string>& inputs);

// Replayable record: {"command", "config", "inputs": {key: {path, fnv1a64}}}.
nlohmann::json run_manifest(const std::string& command, const RunConfig& config,
                            const std::map<std::string, std::string>& inputs);

std::string kebab_case(std::string key);

}  // namespace ces
