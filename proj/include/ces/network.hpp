#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ces/depgraph.hpp"
#include "ces/model_config.hpp"
#include "ces/nd/ops.hpp"
#include "ces/nd/optim.hpp"

namespace ces {

// Model-ready view of one example over its retained tokens.
struct ExampleFeatures {
  std::string id;
  nd::Tensor<float> embeddings;                 // n × d_bert
  std::vector<std::optional<std::size_t>> pos;  // POS index per token, nullopt = unknown
  TokenGraph graph;                             // n nodes
  std::vector<std::size_t> targets;             // gold tag index per token
  std::vector<std::uint8_t> loss_mask;          // nonzero rows enter the loss

  std::size_t size() const { return embeddings.rows(); }
};

template <typename T>
struct SageLayerParams {
  nd::Var<T> w_self;   // d_in × d_out
  nd::Var<T> w_neigh;  // d_in × d_out
  nd::Var<T> bias;     // d_out
};

template <typename T>
struct LstmDirectionParams {
  nd::Var<T> w_input;   // d_in × 4h, gate blocks ordered input, forget, cell, output
  nd::Var<T> w_hidden;  // h × 4h
  nd::Var<T> bias;      // 4h
};

template <typename T>
struct BiLstmParams {
  LstmDirectionParams<T> forward;
  LstmDirectionParams<T> backward;
};

template <typename T>
struct HeadParams {
  nd::Var<T> weight;  // d × c
  nd::Var<T> bias;    // c
};

// One-hot POS rows (n × d_pos); unknown tags give zero rows.
template <typename T>
nd::Tensor<T> pos_onehot(const std::vector<std::optional<std::size_t>>& pos, std::size_t d_pos) {
  nd::Tensor<T> out({pos.size(), d_pos});
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (!pos[i]) continue;
    if (*pos[i] >= d_pos) throw std::out_of_range("POS index " + std::to_string(*pos[i]) + " exceeds d_pos");
    out(i, *pos[i]) = T(1);
  }
  return out;
}

// Mean-aggregator SAGE convolution:
//   out_v = x_v·W_self + mean{x_u : u ∈ neighbors[v]}·W_neigh + bias
template <typename T>
nd::Var<T> sage_layer(const nd::Var<T>& x, const std::vector<std::vector<std::size_t>>& neighbors,
                      const SageLayerParams<T>& p) {
  if (x.value().cols() != p.w_self.value().rows()) {
    throw nd::ShapeError("sage_layer: input width " + std::to_string(x.value().cols()) + " but W_self is " +
                         nd::shape_string(p.w_self.shape()));
  }
  auto self_term = nd::matmul(x, p.w_self);
  auto neigh_term = nd::matmul(nd::mean_aggregate(x, neighbors), p.w_neigh);
  return nd::add_bias(nd::add(self_term, neigh_term), p.bias);
}

// Bidirectional LSTM with zero initial states; row i of the result is
// [forward_h_i ‖ backward_h_i].
template <typename T>
nd::Var<T> bilstm(const nd::Var<T>& x, const BiLstmParams<T>& p) {
  if (x.value().rows() == 0) throw nd::ShapeError("bilstm: empty sequence");
  if (x.value().cols() != p.forward.w_input.value().rows() || x.value().cols() != p.backward.w_input.value().rows()) {
    throw nd::ShapeError("bilstm: input width " + std::to_string(x.value().cols()) +
                         " does not match gate weights " + nd::shape_string(p.forward.w_input.shape()));
  }
  auto fwd = nd::lstm(x, p.forward.w_input, p.forward.w_hidden, p.forward.bias, false);
  auto bwd = nd::lstm(x, p.backward.w_input, p.backward.w_hidden, p.backward.bias, true);
  return nd::concat_cols<T>({fwd, bwd});
}

// The token classifier: contextual features (+ POS) concatenated with
// dependency-graph embeddings, followed by a linear head.
template <typename T>
class Network {
 public:
  // Fresh parameters: weights uniform in ±sqrt(1/fan_in), biases zero, each
  // drawn from its own named sub-stream of `seed`.
  Network(const ModelConfig& config, std::uint64_t seed);
  // Adopts existing parameters; names and shapes must match the config.
  Network(const ModelConfig& config, std::vector<nd::NamedParam<T>> params);

  // Parameters are shared handles; copying would alias them.
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  // n × num_classes logits. `dropout_rng` is required in training mode.
  nd::Var<T> forward(const ExampleFeatures& ex, nd::Mode mode, nd::Rng* dropout_rng) const;

  const ModelConfig& config() const { return config_; }
  std::vector<nd::NamedParam<T>>& parameters() { return params_; }
  const std::vector<nd::NamedParam<T>>& parameters() const { return params_; }

  static std::vector<std::pair<std::string, nd::Shape>> parameter_shapes(const ModelConfig& config);

 private:
  void bind();
  const nd::Var<T>& param(const std::string& name) const;

  ModelConfig config_;
  std::vector<nd::NamedParam<T>> params_;
  std::optional<nd::Var<T>> projection_;
  SageLayerParams<T> sage1_;
  SageLayerParams<T> sage2_;
  BiLstmParams<T> lstm_;
  HeadParams<T> head_;
};

extern template class Network<float>;
extern template class Network<double>;

// Neighbor lists used for mean aggregation under the configured direction.
std::vector<std::vector<std::size_t>> aggregation_neighbors(const TokenGraph& graph, EdgeDirection direction);

}  // namespace ces
