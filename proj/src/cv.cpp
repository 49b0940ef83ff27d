#include "ces/cv.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "ces/error.hpp"

namespace ces {

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw InputError("kfold_split: k must be positive");
  if (k > n) throw InputError("kfold_split: " + std::to_string(k) + " folds for " + std::to_string(n) + " items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  nd::Rng rng(seed, "folds");
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                    order.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  return folds;
}

std::vector<std::vector<std::string>> kfold_split(std::span<const std::string> ids, std::size_t k,
                                                  std::uint64_t seed) {
  std::vector<std::vector<std::string>> out;
  for (const auto& fold : kfold_split(ids.size(), k, seed)) {
    auto& f = out.emplace_back();
    for (auto i : fold) f.push_back(ids[i]);
  }
  return out;
}

MetricsReport score_model(const TrainedModel& model, std::span<const Document> docs,
                          const EmbeddingProvider& provider, const PredictOptions& options, const Scorer& scorer) {
  std::vector<WordLabels> gold;
  std::vector<WordLabels> pred;
  for (const auto& doc : docs) {
    const auto features = encode_features(doc, model.pos_vocab, provider);
    const auto p = predict(model, doc, features, options);
    gold.push_back(collapse_all(doc.labeled.word_labels()));
    pred.push_back(collapse_all(p.word_tags));
  }
  return scorer ? scorer(gold, pred) : evaluate(gold, pred);
}

namespace {

CvCell run_cell(std::span<const Document> docs, const std::vector<std::vector<std::size_t>>& folds,
                std::uint64_t seed, std::size_t fold, const ModelConfig& config, const EmbeddingProvider& provider,
                const CvOptions& options) {
  std::vector<Document> train_docs;
  std::vector<Document> test_docs;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto& target = f == fold ? test_docs : train_docs;
    for (auto i : folds[f]) target.push_back(docs[i]);
  }
  CvCell cell;
  cell.seed = seed;
  cell.fold = fold;
  cell.train_size = train_docs.size();
  cell.test_size = test_docs.size();
  auto fitted = fit(train_docs, config, seed, provider);
  cell.epoch_loss = std::move(fitted.epoch_loss);
  cell.report = score_model(fitted.model, test_docs, provider, options.predict, options.scorer);
  return cell;
}

}  // namespace

std::vector<CvCell> run_cv(std::span<const Document> docs, const ModelConfig& config,
                           const EmbeddingProvider& provider, const CvOptions& options) {
  if (options.seeds.empty()) throw InputError("cross-validation needs at least one seed");
  if (options.folds < 2) throw InputError("cross-validation needs at least two folds");
  struct Task {
    std::uint64_t seed;
    std::size_t fold;
    std::shared_ptr<const std::vector<std::vector<std::size_t>>> folds;
  };
  std::vector<Task> tasks;
  for (auto seed : options.seeds) {
    auto folds = std::make_shared<const std::vector<std::vector<std::size_t>>>(
        kfold_split(docs.size(), options.folds, seed));
    for (std::size_t f = 0; f < options.folds; ++f) tasks.push_back({seed, f, folds});
  }

  std::vector<CvCell> cells(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      const auto& t = tasks[i];
      try {
        cells[i] = run_cell(docs, *t.folds, t.seed, t.fold, config, provider, options);
        spdlog::info("cv seed {} fold {}: F1 {:.2f} EM {:.2f}", t.seed, t.fold, cells[i].report.f1,
                     cells[i].report.exact_match);
        if (options.on_cell) {
          std::lock_guard lock(report_mutex);
          options.on_cell(cells[i]);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, tasks.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i]) continue;
    const std::string where = "(seed " + std::to_string(tasks[i].seed) + ", fold " + std::to_string(tasks[i].fold) + ")";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return cells;
}

MetricsReport mean_report(std::span<const CvCell> cells) {
  MetricsReport m;
  if (cells.empty()) return m;
  for (const auto& c : cells) {
    m.precision += c.report.precision;
    m.recall += c.report.recall;
    m.f1 += c.report.f1;
    m.exact_match += c.report.exact_match;
    m.examples += c.report.examples;
    m.words += c.report.words;
  }
  const double n = static_cast<double>(cells.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  m.exact_match /= n;
  return m;
}

nlohmann::json to_json(const CvCell& cell) {
  return {{"seed", cell.seed},           {"fold", cell.fold},
          {"train_size", cell.train_size}, {"test_size", cell.test_size},
          {"metrics", to_json(cell.report)}, {"epoch_loss", cell.epoch_loss}};
}

}  // namespace ces
