#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ces/labels.hpp"

namespace ces {

using WordLabels = std::vector<SpanType>;

struct ClassScore {
  SpanType label = SpanType::kOther;
  std::size_t support = 0;    // gold words of this class
  std::size_t predicted = 0;  // predicted words of this class
  std::size_t correct = 0;
  double precision = 0.0;  // fractions in [0, 1]
  double recall = 0.0;
  double f1 = 0.0;
};

// Support-weighted precision, recall and F1 over word labels, plus Exact
// Match. Headline values are percentages.
struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double exact_match = 0.0;
  std::size_t examples = 0;
  std::size_t words = 0;
  std::vector<ClassScore> classes;  // classes present in gold or prediction
};

// Word counts pooled over the dataset, per-class scores, then a weighted mean
// with gold support as weights. A class never predicted has precision 0.
MetricsReport token_metrics(std::span<const WordLabels> gold, std::span<const WordLabels> pred);

// Percentage of examples whose every word label matches.
double exact_match(std::span<const WordLabels> gold, std::span<const WordLabels> pred);

// token_metrics with exact_match filled in.
MetricsReport evaluate(std::span<const WordLabels> gold, std::span<const WordLabels> pred);

// Replacement scoring function, e.g. a port of an official scorer.
using Scorer = std::function<MetricsReport(std::span<const WordLabels>, std::span<const WordLabels>)>;

WordLabels collapse_all(std::span<const LabelTag> tags);

nlohmann::json to_json(const MetricsReport& r);

// Aligned plain-text table: one row per (name, report), columns Precision,
// Recall, F1, ExactMatch, values with two decimals.
std::string format_table(std::span<const std::pair<std::string, MetricsReport>> rows);

}  // namespace ces
