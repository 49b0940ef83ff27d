#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ces/corpus.hpp"
#include "ces/depgraph.hpp"
#include "ces/embeddings.hpp"
#include "ces/network.hpp"
#include "ces/train.hpp"
#include "ces/viterbi.hpp"

namespace ces {

// A dataset row joined with its tokenization and parse.
struct Document {
  RawExample raw;
  LabeledExample labeled;
  std::vector<std::string> pieces;  // full, untruncated token pieces
  std::vector<DepArc> arcs;
  TokenGraph graph;                     // over retained tokens
  std::vector<std::string> token_pos;   // POS of each retained token's word
  std::size_t sentence_count = 1;
};

// Optional side inputs keyed by example id.
struct DocumentSources {
  std::span<const ParsedDocument> parses;
  std::span<const Tokenization> tokenizations;
  bool require_parses = true;
};

// Joins rows with their sources. Words come from the tokenization when one
// is given, else from the parse's forms, else from whitespace segmentation;
// tokens default to one piece per word. Every failing example is reported
// in a single InputError.
std::vector<Document> build_documents(std::span<const RawExample> rows, const DocumentSources& sources,
                                      std::size_t max_seq_len);

// POS tags of the documents' words in order of first appearance.
PosVocab build_pos_vocab(std::span<const Document> docs, std::size_t capacity);

ExampleFeatures encode_features(const Document& doc, const PosVocab& vocab, const EmbeddingProvider& provider);
std::vector<ExampleFeatures> encode_all(std::span<const Document> docs, const PosVocab& vocab,
                                        const EmbeddingProvider& provider);

std::vector<std::vector<LabelTag>> gold_word_sequences(std::span<const Document> docs);

struct TrainedModel {
  Network<float> network;
  PosVocab pos_vocab;
  TransitionModel transitions;
};

struct FitResult {
  TrainedModel model;
  std::vector<double> epoch_loss;
};

FitResult fit(std::span<const Document> docs, const ModelConfig& config, std::uint64_t seed,
              const EmbeddingProvider& provider, const TrainOptions& options = {});

void save_model(const std::filesystem::path& path, const TrainedModel& model, nlohmann::json extra_metadata = {});
// `expected`, when given, must have the same architecture as the stored one.
TrainedModel load_model(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

struct PredictOptions {
  bool viterbi = true;
  DecodeGranularity granularity = DecodeGranularity::kWord;
};

struct Prediction {
  std::vector<LabelTag> token_tags;  // retained tokens
  std::vector<LabelTag> word_tags;   // every word; truncated words are O
  DecodedSpans spans;
};

Prediction predict(const TrainedModel& model, const Document& doc, const ExampleFeatures& features,
                   const PredictOptions& options = {});

}  // namespace ces
