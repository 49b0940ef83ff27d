#include "ces/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace ces {
namespace {

void check_aligned(std::span<const WordLabels> gold, std::span<const WordLabels> pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(gold.size()) + " gold examples but " +
                                std::to_string(pred.size()) + " predicted");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw std::invalid_argument("metrics: example " + std::to_string(i) + " has " +
                                  std::to_string(gold[i].size()) + " gold words but " +
                                  std::to_string(pred[i].size()) + " predicted");
    }
  }
}

}  // namespace

WordLabels collapse_all(std::span<const LabelTag> tags) {
  WordLabels out;
  out.reserve(tags.size());
  for (auto t : tags) out.push_back(collapse(t));
  return out;
}

MetricsReport token_metrics(std::span<const WordLabels> gold, std::span<const WordLabels> pred) {
  check_aligned(gold, pred);
  std::array<std::size_t, kNumSpanTypes> support{};
  std::array<std::size_t, kNumSpanTypes> predicted{};
  std::array<std::size_t, kNumSpanTypes> correct{};
  MetricsReport r;
  r.examples = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t w = 0; w < gold[i].size(); ++w) {
      const auto g = static_cast<std::size_t>(gold[i][w]);
      const auto p = static_cast<std::size_t>(pred[i][w]);
      ++support[g];
      ++predicted[p];
      if (g == p) ++correct[g];
      ++r.words;
    }
  }
  double p_sum = 0.0;
  double r_sum = 0.0;
  double f_sum = 0.0;
  for (std::size_t c = 0; c < kNumSpanTypes; ++c) {
    if (support[c] == 0 && predicted[c] == 0) continue;
    ClassScore s;
    s.label = static_cast<SpanType>(c);
    s.support = support[c];
    s.predicted = predicted[c];
    s.correct = correct[c];
    s.precision = predicted[c] == 0 ? 0.0 : static_cast<double>(correct[c]) / static_cast<double>(predicted[c]);
    s.recall = support[c] == 0 ? 0.0 : static_cast<double>(correct[c]) / static_cast<double>(support[c]);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    const double weight = static_cast<double>(support[c]);
    p_sum += weight * s.precision;
    r_sum += weight * s.recall;
    f_sum += weight * s.f1;
    r.classes.push_back(s);
  }
  if (r.words > 0) {
    const double total = static_cast<double>(r.words);
    r.precision = 100.0 * p_sum / total;
    r.recall = 100.0 * r_sum / total;
    r.f1 = 100.0 * f_sum / total;
  }
  return r;
}

double exact_match(std::span<const WordLabels> gold, std::span<const WordLabels> pred) {
  check_aligned(gold, pred);
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
}

MetricsReport evaluate(std::span<const WordLabels> gold, std::span<const WordLabels> pred) {
  auto r = token_metrics(gold, pred);
  r.exact_match = exact_match(gold, pred);
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"label", std::string(to_string(c.label))},
                       {"support", c.support},
                       {"predicted", c.predicted},
                       {"correct", c.correct},
                       {"precision", 100.0 * c.precision},
                       {"recall", 100.0 * c.recall},
                       {"f1", 100.0 * c.f1}});
  }
  return {{"precision", r.precision}, {"recall", r.recall},     {"f1", r.f1},
          {"exact_match", r.exact_match}, {"examples", r.examples}, {"words", r.words},
          {"classes", classes}};
}

std::string format_table(std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::size_t name_width = 5;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::string out = fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>10}\n", "Model", name_width, "Precision", "Recall",
                                "F1", "ExactMatch");
  for (const auto& [name, r] : rows) {
    out += fmt::format("{:<{}}  {:>9.2f}  {:>9.2f}  {:>9.2f}  {:>10.2f}\n", name, name_width, r.precision, r.recall,
                       r.f1, r.exact_match);
  }
  return out;
}

}  // namespace ces
