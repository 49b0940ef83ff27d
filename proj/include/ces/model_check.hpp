#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ces/model_config.hpp"
#include "ces/network.hpp"

namespace ces {

struct ModelGradCheckOptions {
  std::size_t d_bert = 8;
  std::size_t gnn_hidden = 6;
  std::size_t d_gnn = 4;
  std::size_t instances = 20;
  std::size_t max_tokens = 5;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  double corrupt_factor = 1.0;  // test hook, see nd::GradCheckOptions
};

struct GradCheckInstance {
  ModelConfig config;
  std::size_t tokens = 0;
  std::size_t edges = 0;
  double max_relative_error = 0.0;
  std::string worst_param;
};

struct ModelGradCheckReport {
  std::vector<GradCheckInstance> instances;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Random tiny example (embeddings, POS, graph, targets) for `config`.
ExampleFeatures random_example(const ModelConfig& config, std::size_t tokens, nd::Rng& rng);

// Finite-difference check of cross entropy through the full network in
// 64-bit mode over random tiny instances. Instances rotate through edge
// directions and dropout scopes and keep dropout active with a fixed mask.
ModelGradCheckReport check_model_gradients(const ModelGradCheckOptions& options);

}  // namespace ces
