#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ces/network.hpp"

namespace ces {

struct TrainOptions {
  // Called after each epoch with (epoch index, mean example loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainResult {
  Network<float> network;
  std::vector<double> epoch_loss;
};

// Seeded mini-batch training: per-epoch shuffle, per-example losses averaged
// over each batch, one Adam step per batch with linearly decaying learning
// rate over epochs × ceil(N / batch_size) steps.
TrainResult train(std::span<const ExampleFeatures> data, const ModelConfig& config, std::uint64_t seed,
                  const TrainOptions& options = {});

// Per-token argmax of eval-mode logits.
std::vector<std::size_t> argmax_tags(const Network<float>& net, const ExampleFeatures& ex);

// Fraction of loss-masked tokens whose argmax equals the gold tag.
double token_accuracy(const Network<float>& net, std::span<const ExampleFeatures> data);

}  // namespace ces
