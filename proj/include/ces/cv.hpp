#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ces/metrics.hpp"
#include "ces/pipeline.hpp"

namespace ces {

inline const std::vector<std::uint64_t> kDefaultCvSeeds{916, 703, 443, 229, 585};

// Seeded shuffle of 0..n-1 cut into k contiguous folds; the first n % k
// folds hold one extra item.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<std::vector<std::string>> kfold_split(std::span<const std::string> ids, std::size_t k,
                                                  std::uint64_t seed);

// Word-level metrics of a model on labeled documents.
MetricsReport score_model(const TrainedModel& model, std::span<const Document> docs,
                          const EmbeddingProvider& provider, const PredictOptions& options = {},
                          const Scorer& scorer = {});

struct CvCell {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  MetricsReport report;
  std::vector<double> epoch_loss;
};

struct CvOptions {
  std::vector<std::uint64_t> seeds = kDefaultCvSeeds;
  std::size_t folds = 3;
  std::size_t jobs = 1;  // cells trained concurrently
  PredictOptions predict;
  Scorer scorer;  // defaults to evaluate()
  std::function<void(const CvCell&)> on_cell;
};

// For every seed: split, then train on k-1 folds and score the held-out
// fold, for each fold. Cells are returned ordered by (seed, fold); the seed
// also seeds training.
std::vector<CvCell> run_cv(std::span<const Document> docs, const ModelConfig& config,
                           const EmbeddingProvider& provider, const CvOptions& options = {});

// Mean of each headline metric over the cells.
MetricsReport mean_report(std::span<const CvCell> cells);

nlohmann::json to_json(const CvCell& cell);

}  // namespace ces
