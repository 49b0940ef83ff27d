#include "ces/model_check.hpp"

#include <algorithm>
#include <set>

#include "ces/nd/gradcheck.hpp"

namespace ces {

ExampleFeatures random_example(const ModelConfig& config, std::size_t tokens, nd::Rng& rng) {
  ExampleFeatures ex;
  ex.id = "random";
  ex.embeddings = nd::Tensor<float>({tokens, config.d_bert});
  for (auto& v : ex.embeddings.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < tokens; ++i) {
    const auto k = rng.below(config.d_pos + 1);
    ex.pos.push_back(k == config.d_pos ? std::nullopt : std::optional<std::size_t>(k));
  }
  ex.graph.n_nodes = tokens;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t t = 1; t < tokens; ++t) edges.insert({rng.below(t), t});
  for (std::size_t extra = rng.below(tokens + 1); extra > 0; --extra) {
    const auto a = rng.below(tokens);
    const auto b = rng.below(tokens);
    if (a != b) edges.insert({a, b});
  }
  ex.graph.edges.assign(edges.begin(), edges.end());
  for (std::size_t i = 0; i < tokens; ++i) ex.targets.push_back(rng.below(config.num_classes));
  if (tokens > 1 && rng.uniform() < 0.5) {
    ex.loss_mask.assign(tokens, 1);
    ex.loss_mask[rng.below(tokens)] = 0;
  }
  return ex;
}

ModelGradCheckReport check_model_gradients(const ModelGradCheckOptions& options) {
  ModelGradCheckReport report;
  nd::Rng rng(options.seed, "gradcheck/instances");
  const EdgeDirection directions[] = {EdgeDirection::kHeadToTail, EdgeDirection::kTailToHead,
                                      EdgeDirection::kSymmetric};
  for (std::size_t k = 0; k < options.instances; ++k) {
    ModelConfig c;
    c.d_bert = options.d_bert;
    c.d_pos = 3;
    c.gnn_hidden = options.gnn_hidden;
    c.d_gnn = options.d_gnn;
    c.bilstm_out = options.d_gnn;
    c.edge_direction = directions[k % 3];
    c.dropout_scope = k % 2 == 0 ? DropoutScope::kAll : DropoutScope::kEmbeddings;
    c.project_embeddings = k % 4 == 1;
    c.dropout = 0.25;
    const std::size_t tokens = 1 + rng.below(std::max<std::size_t>(1, options.max_tokens));
    const auto ex = random_example(c, tokens, rng);
    const std::uint64_t instance_seed = rng.next();

    Network<double> net(c, instance_seed);
    auto loss_fn = [&] {
      nd::Rng mask_rng(instance_seed, "dropout");
      auto logits = net.forward(ex, nd::Mode::kTrain, &mask_rng);
      return nd::cross_entropy(logits, std::span<const std::size_t>(ex.targets),
                               std::span<const std::uint8_t>(ex.loss_mask));
    };
    nd::GradCheckOptions gc;
    gc.sample_seed = instance_seed;
    gc.corrupt_factor = options.corrupt_factor;
    const auto r = nd::finite_diff_check(loss_fn, net.parameters(), gc);

    GradCheckInstance inst{c, tokens, ex.graph.edges.size(), r.max_relative_error, r.worst_param};
    report.max_relative_error = std::max(report.max_relative_error, r.max_relative_error);
    report.instances.push_back(std::move(inst));
  }
  report.passed = !report.instances.empty() && report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace ces
