#include "ces/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ces/error.hpp"

namespace ces {

TrainResult train(std::span<const ExampleFeatures> data, const ModelConfig& config, std::uint64_t seed,
                  const TrainOptions& options) {
  TrainResult result{Network<float>(config, seed), {}};
  if (config.epochs == 0) return result;
  if (data.empty()) throw InputError("training set is empty");

  auto& params = result.network.parameters();
  auto adam = nd::make_adam_state(params);
  const std::size_t n = data.size();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const nd::LrSchedule schedule(config.base_lr, config.epochs * batches_per_epoch);

  nd::Rng shuffle_rng(seed, "shuffle");
  nd::Rng dropout_rng(seed, "dropout");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::size_t end = std::min(n, b + config.batch_size);
      const float weight = 1.0f / static_cast<float>(end - b);
      for (auto& p : params) p.var.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const auto& ex = data[order[k]];
        auto logits = result.network.forward(ex, nd::Mode::kTrain, &dropout_rng);
        auto loss = nd::cross_entropy(logits, std::span<const std::size_t>(ex.targets),
                                      std::span<const std::uint8_t>(ex.loss_mask));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss " << value << " at epoch " << epoch << ", step " << step << ", example " << ex.id
              << " (" << ex.size() << " tokens, lr " << schedule(step) << ")";
          throw std::runtime_error(msg.str());
        }
        epoch_loss += value;
        nd::scale(loss, weight).backward();
      }
      nd::adam_step(params, adam, schedule(step));
      ++step;
    }
    epoch_loss /= static_cast<double>(n);
    result.epoch_loss.push_back(epoch_loss);
    spdlog::debug("epoch {} loss {:.6f}", epoch, epoch_loss);
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss);
  }
  return result;
}

std::vector<std::size_t> argmax_tags(const Network<float>& net, const ExampleFeatures& ex) {
  const auto logits = net.forward(ex, nd::Mode::kEval, nullptr);
  const auto& v = logits.value();
  std::vector<std::size_t> out(v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.cols(); ++j) {
      if (v(i, j) > v(i, best)) best = j;
    }
    out[i] = best;
  }
  return out;
}

double token_accuracy(const Network<float>& net, std::span<const ExampleFeatures> data) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& ex : data) {
    const auto pred = argmax_tags(net, ex);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!ex.loss_mask.empty() && !ex.loss_mask[i]) continue;
      ++total;
      correct += pred[i] == ex.targets[i] ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace ces
