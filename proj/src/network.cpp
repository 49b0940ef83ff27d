#include "ces/network.hpp"

#include <algorithm>
#include <cmath>

#include "ces/error.hpp"

namespace ces {

std::vector<std::vector<std::size_t>> aggregation_neighbors(const TokenGraph& graph, EdgeDirection direction) {
  switch (direction) {
    case EdgeDirection::kHeadToTail:
      return graph.in_neighbors();
    case EdgeDirection::kTailToHead:
      return graph.out_neighbors();
    case EdgeDirection::kSymmetric: {
      auto in = graph.in_neighbors();
      const auto out = graph.out_neighbors();
      for (std::size_t v = 0; v < in.size(); ++v) {
        in[v].insert(in[v].end(), out[v].begin(), out[v].end());
        std::sort(in[v].begin(), in[v].end());
        in[v].erase(std::unique(in[v].begin(), in[v].end()), in[v].end());
      }
      return in;
    }
  }
  return {};
}

template <typename T>
std::vector<std::pair<std::string, nd::Shape>> Network<T>::parameter_shapes(const ModelConfig& c) {
  std::vector<std::pair<std::string, nd::Shape>> s;
  if (c.project_embeddings) s.push_back({"proj.weight", {c.d_bert, c.d_bert}});
  if (c.use_gnn) {
    const auto d_in = c.gnn_input_dim();
    s.push_back({"sage1.w_self", {d_in, c.gnn_hidden}});
    s.push_back({"sage1.w_neigh", {d_in, c.gnn_hidden}});
    s.push_back({"sage1.bias", {c.gnn_hidden}});
    s.push_back({"sage2.w_self", {c.gnn_hidden, c.d_gnn}});
    s.push_back({"sage2.w_neigh", {c.gnn_hidden, c.d_gnn}});
    s.push_back({"sage2.bias", {c.d_gnn}});
    if (c.use_bilstm) {
      const auto h = c.bilstm_out / 2;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string prefix = std::string("lstm.") + dir;
        s.push_back({prefix + ".w_input", {c.d_gnn, 4 * h}});
        s.push_back({prefix + ".w_hidden", {h, 4 * h}});
        s.push_back({prefix + ".bias", {4 * h}});
      }
    }
  }
  s.push_back({"head.weight", {c.head_input_dim(), c.num_classes}});
  s.push_back({"head.bias", {c.num_classes}});
  return s;
}

template <typename T>
Network<T>::Network(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  for (auto& [name, shape] : parameter_shapes(config_)) {
    nd::Tensor<T> value(shape);
    if (name == "proj.weight") {
      for (std::size_t i = 0; i < shape[0]; ++i) value(i, i) = T(1);
    } else if (shape.size() == 2) {
      nd::Rng rng(seed, "init/" + name);
      const double bound = std::sqrt(1.0 / static_cast<double>(shape[0]));
      for (auto& v : value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    params_.push_back({name, nd::Var<T>::parameter(std::move(value))});
  }
  bind();
}

template <typename T>
Network<T>::Network(const ModelConfig& config, std::vector<nd::NamedParam<T>> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const auto expected = parameter_shapes(config_);
  if (expected.size() != params_.size()) {
    throw InputError("model has " + std::to_string(params_.size()) + " parameter tensors, config expects " +
                     std::to_string(expected.size()));
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (params_[k].name != expected[k].first || params_[k].var.shape() != expected[k].second) {
      throw InputError("parameter " + params_[k].name + nd::shape_string(params_[k].var.shape()) +
                       " does not match expected " + expected[k].first + nd::shape_string(expected[k].second));
    }
  }
  bind();
}

template <typename T>
const nd::Var<T>& Network<T>::param(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.var;
  }
  throw std::logic_error("missing parameter " + name);
}

template <typename T>
void Network<T>::bind() {
  if (config_.project_embeddings) projection_ = param("proj.weight");
  if (config_.use_gnn) {
    sage1_ = {param("sage1.w_self"), param("sage1.w_neigh"), param("sage1.bias")};
    sage2_ = {param("sage2.w_self"), param("sage2.w_neigh"), param("sage2.bias")};
    if (config_.use_bilstm) {
      lstm_.forward = {param("lstm.fwd.w_input"), param("lstm.fwd.w_hidden"), param("lstm.fwd.bias")};
      lstm_.backward = {param("lstm.bwd.w_input"), param("lstm.bwd.w_hidden"), param("lstm.bwd.bias")};
    }
  }
  head_ = {param("head.weight"), param("head.bias")};
}

template <typename T>
nd::Var<T> Network<T>::forward(const ExampleFeatures& ex, nd::Mode mode, nd::Rng* dropout_rng) const {
  const auto& c = config_;
  const std::size_t n = ex.size();
  if (n == 0) throw std::invalid_argument("example " + ex.id + " has no tokens");
  if (ex.embeddings.cols() != c.d_bert) {
    throw InputError("example " + ex.id + ": embedding width " + std::to_string(ex.embeddings.cols()) +
                     " but d_bert is " + std::to_string(c.d_bert));
  }
  if (ex.pos.size() != n || ex.graph.n_nodes != n) {
    throw std::invalid_argument("example " + ex.id + ": POS/graph size does not match token count");
  }

  nd::Var<T> r = nd::Var<T>::constant(ex.embeddings.template cast<T>());
  if (projection_) r = nd::matmul(r, *projection_);
  r = nd::dropout(r, c.dropout, mode, dropout_rng);

  nd::Var<T> features = r;
  if (c.use_pos) features = nd::concat_cols<T>({r, nd::Var<T>::constant(pos_onehot<T>(ex.pos, c.d_pos))});

  nd::Var<T> logits_in = features;
  if (c.use_gnn) {
    const bool extra_dropout = c.dropout_scope == DropoutScope::kAll;
    nd::Var<T> node_in = c.node_features == NodeFeatures::kConstantOne
                             ? nd::Var<T>::constant(nd::Tensor<T>({n, 1}, T(1)))
                             : features;
    const auto neighbors = aggregation_neighbors(ex.graph, c.edge_direction);
    auto g = nd::relu(sage_layer(node_in, neighbors, sage1_));
    if (extra_dropout) g = nd::dropout(g, c.dropout, mode, dropout_rng);
    g = sage_layer(g, neighbors, sage2_);
    if (c.use_bilstm) g = bilstm(g, lstm_);
    if (extra_dropout) g = nd::dropout(g, c.dropout, mode, dropout_rng);
    logits_in = nd::concat_cols<T>({features, g});
  }
  return nd::add_bias(nd::matmul(logits_in, head_.weight), head_.bias);
}

template class Network<float>;
template class Network<double>;

}  // namespace ces
