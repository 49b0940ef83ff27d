// ces: train, apply and evaluate the cause-effect span tagger.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ces/checkpoint.hpp"
#include "ces/cv.hpp"
#include "ces/error.hpp"
#include "ces/io.hpp"
#include "ces/metrics.hpp"
#include "ces/model_check.hpp"
#include "ces/pipeline.hpp"
#include "ces/run_config.hpp"
#include "ces/stats.hpp"
#include "ces/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ces {
namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

// Flag storage for one subcommand: raw strings keyed by config key.
struct CommandFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool no_viterbi = false;

  json to_layer() const {
    json layer = json::object();
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) layer[key] = parse_flag_value(key, values.at(key));
    }
    if (no_viterbi) layer["viterbi"] = false;
    return layer;
  }
};

std::vector<std::string> model_key_names() {
  std::vector<std::string> keys;
  const auto defaults = to_json(ModelConfig{});
  for (const auto& [key, _] : defaults.items()) keys.push_back(key);
  return keys;
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, CommandFlags& flags,
                      const std::vector<std::string>& run_keys, bool model_keys) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", flags.config_path, "JSON config file or run manifest")->check(CLI::ExistingFile);
  const auto defaults = to_json(RunConfig{});
  auto add_key = [&](const std::string& key, const std::string& group) {
    const auto& def = defaults.at(key);
    const std::string flag = "--" + kebab_case(key);
    const std::string help_text = def.is_string() && def.get<std::string>().empty()
                                      ? key
                                      : fmt::format("{} (default {})", key, def.is_string() ? def.get<std::string>()
                                                                                             : def.dump());
    CLI::Option* opt = def.is_boolean() ? sub->add_flag(flag + "{true}", flags.values[key], help_text)
                                        : sub->add_option(flag, flags.values[key], help_text);
    opt->group(group);
    flags.options[key] = opt;
  };
  for (const auto& key : run_keys) add_key(key, "Run");
  if (model_keys) {
    add_key("ablation", "Model");
    for (const auto& key : model_key_names()) add_key(key, "Model");
  }
  return sub;
}

RunConfig resolve(const CommandFlags& flags) {
  const json file = flags.config_path.empty() ? json::object() : read_config_file(flags.config_path);
  return resolve_run_config(file, flags.to_layer());
}

bool model_keys_given(const CommandFlags& flags) {
  const json file = flags.config_path.empty() ? json::object() : read_config_file(flags.config_path);
  return sets_model_keys(file, flags.to_layer());
}

void require(const std::string& value, const std::string& key) {
  if (value.empty()) throw InputError("--" + kebab_case(key) + " is required");
}

std::map<std::string, std::string> data_inputs(const RunConfig& rc) {
  return {{"dataset", rc.dataset}, {"conllu", rc.conllu}, {"tokens", rc.tokens}, {"embeddings", rc.embeddings}};
}

struct LoadedData {
  std::vector<RawExample> rows;
  std::vector<ParsedDocument> parses;
  std::vector<Tokenization> tokenizations;
};

LoadedData load_inputs(const RunConfig& rc) {
  LoadedData d;
  d.rows = read_dataset(rc.dataset, rc.delimiter[0]);
  if (!rc.conllu.empty()) {
    d.parses = read_conllu(rc.conllu, rc.doc_split == "file" ? DocumentSplit::kWholeFile : DocumentSplit::kDocIdComment);
  }
  if (!rc.tokens.empty()) d.tokenizations = read_tokenization(fs::path(rc.tokens));
  return d;
}

std::vector<Document> documents(const LoadedData& d, const RunConfig& rc, const ModelConfig& model) {
  if (model.use_gnn && rc.conllu.empty() && !d.rows.empty()) {
    throw InputError("--conllu is required when the graph encoder is enabled");
  }
  DocumentSources src{d.parses, d.tokenizations, model.use_gnn};
  return build_documents(d.rows, src, model.max_seq_len);
}

EmbeddingProvider embedding_provider(const RunConfig& rc, const ModelConfig& model) {
  if (rc.embeddings.empty()) {
    spdlog::warn("no --embeddings given; using hashed stand-in vectors of width {}", model.d_bert);
    return EmbeddingProvider::hashed(model.d_bert);
  }
  auto p = EmbeddingProvider::from_file(fs::path(rc.embeddings));
  if (p.dim() != model.d_bert) {
    throw InputError("embedding file has width " + std::to_string(p.dim()) + " but d_bert is " +
                     std::to_string(model.d_bert));
  }
  return p;
}

void write_json(const fs::path& path, const json& j) {
  write_file_atomic(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

fs::path sibling(const fs::path& path, const std::string& suffix) { return fs::path(path.string() + suffix); }

int cmd_train(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.dataset, "dataset");
  require(rc.checkpoint, "checkpoint");
  const auto inputs = data_inputs(rc);
  check_inputs_exist(inputs);
  const auto data = load_inputs(rc);
  const auto docs = documents(data, rc, rc.model);
  const auto provider = embedding_provider(rc, rc.model);
  spdlog::info("training on {} examples, {} epochs, seed {}", docs.size(), rc.model.epochs, rc.seed);

  TrainOptions opts;
  opts.on_epoch = [&](std::size_t epoch, double loss) { spdlog::info("epoch {} loss {:.6f}", epoch + 1, loss); };
  auto fitted = fit(docs, rc.model, rc.seed, provider, opts);
  save_model(rc.checkpoint, fitted.model, {{"seed", rc.seed}});
  write_file_atomic(sibling(rc.checkpoint, ".loss.tsv"), [&](std::ostream& out) {
    out << "epoch\tloss\n";
    for (std::size_t e = 0; e < fitted.epoch_loss.size(); ++e) {
      out << e + 1 << '\t' << fmt::format("{:.9g}", fitted.epoch_loss[e]) << '\n';
    }
  });
  write_json(sibling(rc.checkpoint, ".manifest.json"), run_manifest("train", rc, inputs));
  spdlog::info("wrote {}", rc.checkpoint);
  return kOk;
}

int cmd_predict(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.dataset, "dataset");
  require(rc.checkpoint, "checkpoint");
  require(rc.output, "output");
  auto inputs = data_inputs(rc);
  inputs["checkpoint"] = rc.checkpoint;
  check_inputs_exist(inputs);

  const bool explicit_model = model_keys_given(flags);
  const auto model = load_model(rc.checkpoint, explicit_model ? &rc.model : nullptr);
  const auto& mc = model.network.config();
  const auto data = load_inputs(rc);
  const auto docs = documents(data, rc, mc);
  const auto provider = embedding_provider(rc, mc);

  PredictOptions popts;
  popts.viterbi = rc.viterbi;
  popts.granularity = explicit_model ? rc.model.viterbi_granularity : mc.viterbi_granularity;

  std::vector<RawExample> rows;
  json tag_lines = json::array();
  for (const auto& doc : docs) {
    const auto features = encode_features(doc, model.pos_vocab, provider);
    const auto p = predict(model, doc, features, popts);
    rows.push_back({doc.raw.id, doc.raw.text, p.spans.cause, p.spans.effect});
    json tags = json::array();
    for (auto t : p.token_tags) tags.push_back(std::string(to_string(t)));
    json word_tags = json::array();
    for (auto t : p.word_tags) word_tags.push_back(std::string(to_string(t)));
    tag_lines.push_back({{"id", doc.raw.id}, {"tokens", doc.labeled.tokens}, {"tags", tags}, {"word_tags", word_tags}});
  }
  write_file_atomic(rc.output, [&](std::ostream& out) { write_dataset(out, rows, rc.delimiter[0]); });
  write_file_atomic(sibling(rc.output, ".tags.jsonl"), [&](std::ostream& out) {
    for (const auto& line : tag_lines) out << line.dump() << '\n';
  });
  write_json(sibling(rc.output, ".manifest.json"), run_manifest("predict", rc, inputs));
  spdlog::info("wrote {} predictions to {}", rows.size(), rc.output);
  return kOk;
}

std::vector<LabelTag> word_tags(const std::vector<Word>& words) {
  std::vector<LabelTag> tags;
  for (const auto& w : words) tags.push_back(w.label);
  return tags;
}

// Word segmentation used for scoring span CSVs.
std::vector<Word> scoring_words(const RawExample& row, const std::map<std::string, const ParsedDocument*>& parses,
                                const std::map<std::string, const Tokenization*>& toks) {
  if (auto it = toks.find(row.id); it != toks.end()) return it->second->words;
  if (auto it = parses.find(row.id); it != parses.end()) return align_words(row.text, it->second->forms());
  return segment_words(row.text);
}

int cmd_eval(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.gold, "gold");
  require(rc.pred, "pred");
  check_inputs_exist({{"gold", rc.gold}, {"pred", rc.pred}, {"conllu", rc.conllu}, {"tokens", rc.tokens}});
  const auto gold_rows = read_dataset(rc.gold, rc.delimiter[0]);
  const auto pred_rows = read_dataset(rc.pred, rc.delimiter[0]);

  std::map<std::string, const RawExample*> pred_by_id;
  for (const auto& r : pred_rows) pred_by_id[r.id] = &r;
  std::set<std::string> gold_ids;
  std::string missing;
  for (const auto& g : gold_rows) {
    gold_ids.insert(g.id);
    if (!pred_by_id.contains(g.id)) missing += " " + g.id;
  }
  std::string extra;
  for (const auto& p : pred_rows) {
    if (!gold_ids.contains(p.id)) extra += " " + p.id;
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "gold and prediction ids differ";
    if (!missing.empty()) msg += "\n  missing from predictions:" + missing;
    if (!extra.empty()) msg += "\n  not in gold:" + extra;
    throw InputError(msg);
  }

  LoadedData side;
  if (!rc.conllu.empty()) {
    side.parses = read_conllu(rc.conllu, rc.doc_split == "file" ? DocumentSplit::kWholeFile : DocumentSplit::kDocIdComment);
  }
  if (!rc.tokens.empty()) side.tokenizations = read_tokenization(fs::path(rc.tokens));
  std::map<std::string, const ParsedDocument*> parses;
  for (const auto& p : side.parses) parses[p.id] = &p;
  std::map<std::string, const Tokenization*> toks;
  for (const auto& t : side.tokenizations) toks[t.id] = &t;

  std::vector<WordLabels> gold;
  std::vector<WordLabels> pred;
  for (const auto& g : gold_rows) {
    const auto& p = *pred_by_id.at(g.id);
    if (p.text != g.text) throw InputError("example " + g.id + ": prediction text differs from gold text");
    try {
      const auto words = scoring_words(g, parses, toks);
      gold.push_back(collapse_all(word_tags(encode_bio(words, locate_spans(g)))));
      pred.push_back(collapse_all(word_tags(encode_bio(words, locate_spans(p)))));
    } catch (const InputError& e) {
      throw InputError("example " + g.id + ": " + e.what());
    }
  }
  const auto report = evaluate(gold, pred);
  const std::pair<std::string, MetricsReport> row{fs::path(rc.pred).filename().string(), report};
  std::cout << format_table(std::span(&row, 1));
  if (!rc.output.empty()) write_json(rc.output, to_json(report));
  return kOk;
}

int cmd_cv(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.dataset, "dataset");
  const auto inputs = data_inputs(rc);
  check_inputs_exist(inputs);

  std::vector<std::pair<std::string, ModelConfig>> variants;
  if (rc.variants.empty()) {
    variants.emplace_back(rc.ablation.empty() ? "configured" : rc.ablation, rc.model);
  } else {
    for (const auto& name : rc.variants) variants.emplace_back(name, apply_variant(rc.model, find_variant(name)));
  }
  bool any_gnn = false;
  for (const auto& [_, m] : variants) any_gnn = any_gnn || m.use_gnn;
  ModelConfig doc_config = rc.model;
  doc_config.use_gnn = any_gnn;
  const auto data = load_inputs(rc);
  const auto docs = documents(data, rc, doc_config);
  const auto provider = embedding_provider(rc, rc.model);

  CvOptions opts;
  opts.seeds = rc.seeds;
  opts.folds = rc.folds;
  opts.jobs = rc.jobs;
  opts.predict.viterbi = rc.viterbi;

  json out = {{"seeds", rc.seeds}, {"folds", rc.folds}, {"variants", json::array()}};
  std::vector<std::pair<std::string, MetricsReport>> table;
  std::vector<std::vector<CvCell>> all_cells;
  for (const auto& [name, model] : variants) {
    opts.predict.granularity = model.viterbi_granularity;
    spdlog::info("cross-validating {} ({} seeds x {} folds)", name, rc.seeds.size(), rc.folds);
    auto cells = run_cv(docs, model, provider, opts);
    json jc = json::array();
    for (const auto& c : cells) jc.push_back(to_json(c));
    const auto mean = mean_report(cells);
    out["variants"].push_back({{"name", name}, {"config", to_json(model)}, {"cells", jc}, {"mean", to_json(mean)}});
    table.emplace_back(name, mean);
    all_cells.push_back(std::move(cells));
  }
  std::cout << format_table(table);

  if (variants.size() > 1) {
    json tests = json::array();
    const std::vector<std::pair<std::string, double MetricsReport::*>> metrics{
        {"Precision", &MetricsReport::precision},
        {"Recall", &MetricsReport::recall},
        {"F1", &MetricsReport::f1},
        {"ExactMatch", &MetricsReport::exact_match}};
    std::cout << fmt::format("\nPaired t-tests against {} (*** p<0.05, ** p<0.10, * p<0.15, ^ p<0.20)\n",
                             variants.front().first);
    for (std::size_t v = 1; v < variants.size(); ++v) {
      std::string line = fmt::format("{:<24}", variants[v].first);
      json jt = {{"a", variants.front().first}, {"b", variants[v].first}};
      for (const auto& [label, member] : metrics) {
        std::vector<double> a;
        std::vector<double> b;
        for (const auto& c : all_cells.front()) a.push_back(c.report.*member);
        for (const auto& c : all_cells[v]) b.push_back(c.report.*member);
        const auto t = paired_ttest(a, b);
        jt[label] = to_json(t);
        line += fmt::format("  {}: t={:>7.3f}{:<3}", label, t.t, t.mark);
      }
      std::cout << line << '\n';
      tests.push_back(jt);
    }
    out["ttests"] = tests;
  }
  if (!rc.output.empty()) {
    write_json(rc.output, out);
    write_json(sibling(rc.output, ".manifest.json"), run_manifest("cv", rc, inputs));
  }
  return kOk;
}

int cmd_gradcheck(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  ModelGradCheckOptions opts;
  opts.d_bert = rc.dims[0];
  opts.gnn_hidden = rc.dims[1];
  opts.d_gnn = rc.dims[2];
  opts.instances = rc.instances;
  opts.seed = rc.seed;
  opts.tolerance = rc.tolerance;
  opts.corrupt_factor = rc.corrupt ? 1.5 : 1.0;
  if (opts.d_gnn % 2 != 0) throw InputError("the third --dims value (d_gnn) must be even");
  const auto report = check_model_gradients(opts);
  json jr = {{"max_relative_error", report.max_relative_error},
             {"tolerance", rc.tolerance},
             {"passed", report.passed},
             {"instances", json::array()}};
  for (std::size_t k = 0; k < report.instances.size(); ++k) {
    const auto& inst = report.instances[k];
    std::cout << fmt::format("instance {:>3}: tokens {} edges {:>2} direction {:<12} max rel. error {:.3e} ({})\n", k,
                             inst.tokens, inst.edges, to_string(inst.config.edge_direction),
                             inst.max_relative_error, inst.worst_param);
    jr["instances"].push_back({{"tokens", inst.tokens},
                               {"edges", inst.edges},
                               {"max_relative_error", inst.max_relative_error},
                               {"worst_param", inst.worst_param}});
  }
  std::cout << fmt::format("{}: max relative error {:.3e} (tolerance {:.1e})\n", report.passed ? "PASS" : "FAIL",
                           report.max_relative_error, rc.tolerance);
  if (!rc.output.empty()) write_json(rc.output, jr);
  return report.passed ? kOk : kRuntime;
}

int cmd_graph_stats(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.dataset, "dataset");
  require(rc.conllu, "conllu");
  const auto inputs = data_inputs(rc);
  check_inputs_exist(inputs);
  const auto data = load_inputs(rc);
  DocumentSources src{data.parses, data.tokenizations, true};
  const auto docs = build_documents(data.rows, src, rc.model.max_seq_len);

  std::size_t edges = 0;
  std::size_t same = 0;
  std::size_t nodes = 0;
  std::size_t split_ok = 0;
  std::array<std::size_t, kNumSpanTypes> label_nodes{};
  json per_doc = json::array();
  for (const auto& d : docs) {
    std::vector<SpanType> labels;
    for (auto t : d.labeled.token_labels) labels.push_back(collapse(t));
    for (auto l : labels) ++label_nodes[static_cast<std::size_t>(l)];
    std::size_t doc_same = 0;
    for (const auto& [u, v] : d.graph.edges) doc_same += labels[u] == labels[v] ? 1 : 0;
    edges += d.graph.edges.size();
    same += doc_same;
    nodes += labels.size();
    const auto components = d.graph.weak_component_count();
    split_ok += components >= d.sentence_count ? 1 : 0;
    json jd = {{"id", d.raw.id},
               {"nodes", labels.size()},
               {"edges", d.graph.edges.size()},
               {"sentences", d.sentence_count},
               {"components", components}};
    jd["homophily"] = d.graph.edges.empty() ? json(nullptr) : json(homophily_score(d.graph, labels));
    per_doc.push_back(jd);
  }
  double chance = 0.0;
  for (auto c : label_nodes) {
    const double share = nodes == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(nodes);
    chance += share * share;
  }
  const double pooled = edges == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(edges);
  std::cout << fmt::format("documents {}  nodes {}  edges {}\n", docs.size(), nodes, edges);
  if (edges == 0) {
    std::cout << "homophily undefined (no edges)\n";
  } else {
    std::cout << fmt::format("homophily {:.4f} (label-independent baseline {:.4f})\n", pooled, chance);
  }
  std::cout << fmt::format("documents with components >= sentences: {}/{}\n", split_ok, docs.size());
  if (!rc.output.empty()) {
    json out = {{"documents", docs.size()}, {"nodes", nodes},         {"edges", edges},
                {"baseline", chance},       {"per_document", per_doc}};
    out["homophily"] = edges == 0 ? json(nullptr) : json(pooled);
    write_json(rc.output, out);
  }
  return kOk;
}

int cmd_synth(const CommandFlags& flags) {
  const auto rc = resolve(flags);
  require(rc.output, "output");
  SyntheticOptions opts;
  opts.count = rc.count;
  opts.seed = rc.seed;
  const auto corpus = make_synthetic_corpus(opts);
  const fs::path dir(rc.output);
  fs::create_directories(dir);
  write_file_atomic(dir / "dataset.csv",
                    [&](std::ostream& out) { write_dataset(out, corpus.examples, rc.delimiter[0]); });
  write_file_atomic(dir / "parses.conllu", [&](std::ostream& out) {
    for (const auto& p : corpus.parses) write_conllu(out, p);
  });
  write_file_atomic(dir / "tokens.jsonl", [&](std::ostream& out) {
    for (const auto& t : corpus.tokenizations) write_tokenization(out, t);
  });
  spdlog::info("wrote {} synthetic examples to {}", corpus.examples.size(), dir.string());
  return kOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_st("ces");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("CES_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace
}  // namespace ces

int main(int argc, char** argv) {
  using namespace ces;
  setup_logging();
  CLI::App app{"Cause-effect span tagging: training, prediction, evaluation and cross-validation"};
  app.require_subcommand(1);

  const std::vector<std::string> data_keys{"dataset", "conllu", "tokens", "embeddings", "delimiter", "doc_split"};
  auto with = [](std::vector<std::string> base, std::initializer_list<std::string> more) {
    base.insert(base.end(), more);
    return base;
  };

  CommandFlags train_f, predict_f, eval_f, cv_f, grad_f, graph_f, synth_f;
  auto* train = add_command(app, "train", "train a model and write a checkpoint", train_f,
                            with(data_keys, {"checkpoint", "seed"}), true);
  auto* predict = add_command(app, "predict", "tag a dataset with a trained checkpoint", predict_f,
                              with(data_keys, {"checkpoint", "output", "viterbi"}), true);
  predict->add_flag("--no-viterbi", predict_f.no_viterbi, "raw argmax tags instead of Viterbi decoding");
  auto* eval = add_command(app, "eval", "score predicted spans against gold spans", eval_f,
                           {"gold", "pred", "conllu", "tokens", "output", "delimiter", "doc_split"}, false);
  auto* cv = add_command(app, "cv", "repeated k-fold cross-validation with paired t-tests", cv_f,
                         with(data_keys, {"output", "seeds", "folds", "jobs", "variants", "viterbi"}), true);
  auto* grad = add_command(app, "gradcheck", "finite-difference check of the full model gradient", grad_f,
                           {"dims", "instances", "tolerance", "corrupt", "seed", "output"}, false);
  auto* graph = add_command(app, "graph-stats", "dependency-graph homophily report", graph_f,
                            {"dataset", "conllu", "tokens", "delimiter", "doc_split", "output", "max_seq_len"}, false);
  auto* synth = add_command(app, "synth", "write a synthetic corpus (dataset, parses, tokens)", synth_f,
                            {"count", "seed", "output", "delimiter"}, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (train->parsed()) return cmd_train(train_f);
    if (predict->parsed()) return cmd_predict(predict_f);
    if (eval->parsed()) return cmd_eval(eval_f);
    if (cv->parsed()) return cmd_cv(cv_f);
    if (grad->parsed()) return cmd_gradcheck(grad_f);
    if (graph->parsed()) return cmd_graph_stats(graph_f);
    if (synth->parsed()) return cmd_synth(synth_f);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kValidation;
}
