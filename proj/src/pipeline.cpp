#include "ces/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ces/checkpoint.hpp"
#include "ces/error.hpp"

namespace ces {
namespace {

std::string pos_of(const ParsedWord& w) {
  if (!w.xpos.empty() && w.xpos != "_") return w.xpos;
  if (!w.upos.empty() && w.upos != "_") return w.upos;
  return {};
}

template <typename T>
std::unordered_map<std::string, const T*> index_by_id(std::span<const T> items, const char* what) {
  std::unordered_map<std::string, const T*> out;
  for (const auto& item : items) {
    if (!out.emplace(item.id, &item).second) throw InputError(std::string("duplicate ") + what + " id " + item.id);
  }
  return out;
}

Document build_document(const RawExample& row, const ParsedDocument* parse, const Tokenization* tok,
                        std::size_t max_seq_len) {
  Document doc;
  doc.raw = row;
  std::vector<Word> words;
  std::vector<Token> tokens;
  if (tok != nullptr) {
    words = tok->words;
    tokens = tok->tokens;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& wd = words[w];
      if (wd.char_start >= wd.char_end || wd.char_end > row.text.size() ||
          (w > 0 && wd.char_start < words[w - 1].char_end)) {
        throw InputError("word " + std::to_string(w) + " ('" + wd.surface + "') has invalid offsets");
      }
    }
    if (parse != nullptr) {
      if (parse->words.size() != words.size()) {
        throw InputError("parse has " + std::to_string(parse->words.size()) + " words but tokenization has " +
                         std::to_string(words.size()));
      }
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (parse->words[w].form != words[w].surface) {
          throw InputError("word " + std::to_string(w) + ": parse form '" + parse->words[w].form +
                           "' differs from tokenization surface '" + words[w].surface + "'");
        }
        if (words[w].pos.empty()) words[w].pos = pos_of(parse->words[w]);
      }
    }
  } else if (parse != nullptr) {
    words = align_words(row.text, parse->forms());
    for (std::size_t w = 0; w < words.size(); ++w) words[w].pos = pos_of(parse->words[w]);
  } else {
    words = segment_words(row.text);
  }
  if (words.empty()) throw InputError("document has no words");
  if (tok == nullptr) tokens = whitespace_tokens(words);

  words = encode_bio(std::move(words), locate_spans(row));
  doc.labeled = align_to_tokens(row, std::move(words), tokens, max_seq_len);
  for (const auto& t : tokens) doc.pieces.push_back(t.piece);

  if (parse != nullptr) {
    doc.arcs = parse->arcs;
    doc.sentence_count = std::max<std::size_t>(1, parse->sentence_count());
  }
  std::vector<std::size_t> full_map;
  full_map.reserve(tokens.size());
  for (const auto& t : tokens) full_map.push_back(t.word_index);
  doc.graph = build_token_graph(doc.arcs, full_map).restricted(doc.labeled.tokens.size());
  for (auto w : doc.labeled.token_to_word) doc.token_pos.push_back(doc.labeled.words[w].pos);
  return doc;
}

}  // namespace

std::vector<Document> build_documents(std::span<const RawExample> rows, const DocumentSources& sources,
                                      std::size_t max_seq_len) {
  const auto parses = index_by_id(sources.parses, "parse");
  const auto toks = index_by_id(sources.tokenizations, "tokenization");
  std::vector<Document> docs;
  docs.reserve(rows.size());
  std::vector<std::string> problems;
  for (const auto& row : rows) {
    const ParsedDocument* parse = nullptr;
    const Tokenization* tok = nullptr;
    if (auto it = parses.find(row.id); it != parses.end()) parse = it->second;
    if (auto it = toks.find(row.id); it != toks.end()) tok = it->second;
    if (parse == nullptr && sources.require_parses) {
      problems.push_back(row.id + ": no dependency parse");
      continue;
    }
    if (tok == nullptr && !sources.tokenizations.empty()) {
      problems.push_back(row.id + ": no tokenization record");
      continue;
    }
    try {
      docs.push_back(build_document(row, parse, tok, max_seq_len));
    } catch (const InputError& e) {
      problems.push_back(row.id + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " example(s) failed validation:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  return docs;
}

PosVocab build_pos_vocab(std::span<const Document> docs, std::size_t capacity) {
  std::vector<std::string> tags;
  for (const auto& d : docs) {
    for (const auto& w : d.labeled.words) tags.push_back(w.pos);
  }
  return PosVocab::build(tags, capacity);
}

ExampleFeatures encode_features(const Document& doc, const PosVocab& vocab, const EmbeddingProvider& provider) {
  ExampleFeatures ex;
  ex.id = doc.raw.id;
  const std::size_t n = doc.labeled.tokens.size();
  ex.embeddings = provider.lookup(doc.raw.id, doc.pieces, n);
  ex.pos.reserve(n);
  for (const auto& p : doc.token_pos) ex.pos.push_back(vocab.index(p));
  ex.graph = doc.graph;
  ex.targets.reserve(n);
  for (auto t : doc.labeled.token_labels) ex.targets.push_back(tag_index(t));
  return ex;
}

std::vector<ExampleFeatures> encode_all(std::span<const Document> docs, const PosVocab& vocab,
                                        const EmbeddingProvider& provider) {
  std::vector<ExampleFeatures> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(encode_features(d, vocab, provider));
  return out;
}

std::vector<std::vector<LabelTag>> gold_word_sequences(std::span<const Document> docs) {
  std::vector<std::vector<LabelTag>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.labeled.word_labels());
  return out;
}

FitResult fit(std::span<const Document> docs, const ModelConfig& config, std::uint64_t seed,
              const EmbeddingProvider& provider, const TrainOptions& options) {
  if (docs.empty()) throw InputError("training set is empty");
  if (provider.dim() != config.d_bert) {
    throw InputError("embedding width " + std::to_string(provider.dim()) + " but d_bert is " +
                     std::to_string(config.d_bert));
  }
  auto vocab = build_pos_vocab(docs, config.d_pos);
  const auto features = encode_all(docs, vocab, provider);
  const auto gold = gold_word_sequences(docs);
  auto transitions = estimate_transitions(gold);
  auto trained = train(features, config, seed, options);
  return FitResult{TrainedModel{std::move(trained.network), std::move(vocab), std::move(transitions)},
                   std::move(trained.epoch_loss)};
}

void save_model(const std::filesystem::path& path, const TrainedModel& model, nlohmann::json extra_metadata) {
  Checkpoint ckpt;
  ckpt.config = model.network.config();
  ckpt.metadata = extra_metadata.is_object() ? std::move(extra_metadata) : nlohmann::json::object();
  ckpt.metadata["pos_vocab"] = model.pos_vocab.tags();
  ckpt.metadata["transitions"] = model.transitions.to_json();
  for (const auto& p : model.network.parameters()) ckpt.tensors.emplace_back(p.name, p.var.value());
  save_checkpoint(path, ckpt);
}

TrainedModel load_model(const std::filesystem::path& path, const ModelConfig* expected) {
  auto ckpt = load_checkpoint(path, expected);
  if (!ckpt.metadata.contains("pos_vocab") || !ckpt.metadata.contains("transitions")) {
    throw InputError("checkpoint " + path.string() + " lacks POS vocabulary or transition metadata");
  }
  std::vector<nd::NamedParam<float>> params;
  for (auto& [name, t] : ckpt.tensors) params.push_back({name, nd::Var<float>::parameter(std::move(t))});
  const auto tags = ckpt.metadata["pos_vocab"].get<std::vector<std::string>>();
  try {
    return TrainedModel{Network<float>(ckpt.config, std::move(params)), PosVocab::build(tags, ckpt.config.d_pos),
                        TransitionModel::from_json(ckpt.metadata["transitions"])};
  } catch (const nlohmann::json::exception& e) {
    throw InputError("checkpoint " + path.string() + ": bad metadata: " + e.what());
  }
}

Prediction predict(const TrainedModel& model, const Document& doc, const ExampleFeatures& features,
                   const PredictOptions& options) {
  const auto& ex = doc.labeled;
  const auto logits = model.network.forward(features, nd::Mode::kEval, nullptr);
  const auto logp = nd::log_softmax(logits).value();
  const std::size_t n = logp.rows();
  auto emission = [&](std::size_t row) {
    TagArray e{};
    for (std::size_t j = 0; j < kNumTags; ++j) e[j] = static_cast<double>(logp(row, j));
    return e;
  };

  Prediction out;
  if (options.viterbi && options.granularity == DecodeGranularity::kWord) {
    const auto first = ex.first_token_of_word();
    Emissions em;
    for (const auto& f : first) {
      if (!f) break;
      em.push_back(emission(*f));
    }
    out.word_tags.assign(ex.words.size(), LabelTag::kOutside);
    if (!em.empty()) {
      const auto path = viterbi_decode(em, model.transitions);
      std::copy(path.begin(), path.end(), out.word_tags.begin());
    }
    out.token_tags.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      const auto w = ex.token_to_word[t];
      const auto tag = out.word_tags[w];
      const bool first_piece = t == 0 || ex.token_to_word[t - 1] != w;
      out.token_tags[t] = first_piece || tag == LabelTag::kOutside ? tag : inside_tag(collapse(tag));
    }
  } else {
    if (options.viterbi) {
      Emissions em;
      for (std::size_t t = 0; t < n; ++t) em.push_back(emission(t));
      out.token_tags = viterbi_decode(em, model.transitions);
    } else {
      out.token_tags.resize(n);
      for (std::size_t t = 0; t < n; ++t) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < kNumTags; ++j) {
          if (logits.value()(t, j) > logits.value()(t, best)) best = j;
        }
        out.token_tags[t] = tag_from_index(best);
      }
    }
    out.word_tags = lift_to_words(ex, out.token_tags);
  }
  out.spans = spans_from_word_tags(ex, out.word_tags);
  return out;
}

}  // namespace ces
