#include "ces/depgraph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ces/error.hpp"

namespace ces {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

bool parse_int(const std::string& s, long& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::string comment_value(const std::string& line, std::string_view key) {
  // "# key = value"
  std::string_view rest(line);
  rest.remove_prefix(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.substr(0, key.size()) != key) return {};
  rest.remove_prefix(key.size());
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.empty() || rest.front() != '=') return {};
  rest.remove_prefix(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.remove_suffix(1);
  return std::string(rest);
}

struct PendingRow {
  long id;
  long head;
  std::string rel;
  std::size_t line;
};

class ConlluReader {
 public:
  explicit ConlluReader(DocumentSplit split) : split_(split) {
    if (split_ == DocumentSplit::kWholeFile) docs_.emplace_back();
  }

  void line(const std::string& raw, std::size_t line_no) {
    std::string l = raw;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (l.empty()) {
      flush_sentence();
      return;
    }
    if (l.front() == '#') {
      if (split_ == DocumentSplit::kDocIdComment) {
        std::string id = comment_value(l, "newdoc id");
        if (id.empty()) id = comment_value(l, "doc_id");
        if (!id.empty()) {
          flush_sentence();
          docs_.emplace_back();
          docs_.back().id = id;
        }
      }
      return;
    }
    const auto cols = split_tabs(l);
    const auto where = "CoNLL-U line " + std::to_string(line_no);
    if (cols.size() != 10) {
      throw InputError(where + ": expected 10 tab-separated columns, got " + std::to_string(cols.size()));
    }
    // Multi-word token ranges and empty nodes carry no basic dependency.
    if (cols[0].find_first_of("-.") != std::string::npos) return;
    long id = 0;
    if (!parse_int(cols[0], id) || id != static_cast<long>(rows_.size()) + 1) {
      throw InputError(where + ": bad word ID '" + cols[0] + "'");
    }
    long head = 0;
    if (!parse_int(cols[6], head)) {
      throw InputError(where + ": non-integer HEAD '" + cols[6] + "'");
    }
    if (docs_.empty()) {
      throw InputError(where + ": sentence appears before any '# newdoc id' comment");
    }
    words_.push_back(ParsedWord{cols[1], cols[3], cols[4]});
    rows_.push_back(PendingRow{id, head, cols[7], line_no});
  }

  std::vector<ParsedDocument> finish() {
    flush_sentence();
    return std::move(docs_);
  }

 private:
  void flush_sentence() {
    if (rows_.empty()) return;
    auto& doc = docs_.back();
    const std::size_t offset = doc.words.size();
    const long n = static_cast<long>(rows_.size());
    for (const auto& r : rows_) {
      if (r.head < 0 || r.head > n) {
        throw InputError("CoNLL-U line " + std::to_string(r.line) + ": HEAD " +
                         std::to_string(r.head) + " out of range 0.." + std::to_string(n));
      }
      if (r.head == r.id) {
        throw InputError("CoNLL-U line " + std::to_string(r.line) + ": word is its own head");
      }
    }
    doc.sentence_starts.push_back(offset);
    for (auto& w : words_) doc.words.push_back(std::move(w));
    for (const auto& r : rows_) {
      if (r.head == 0) continue;
      doc.arcs.push_back(DepArc{offset + static_cast<std::size_t>(r.head - 1),
                                offset + static_cast<std::size_t>(r.id - 1), r.rel});
    }
    words_.clear();
    rows_.clear();
  }

  DocumentSplit split_;
  std::vector<ParsedDocument> docs_;
  std::vector<ParsedWord> words_;
  std::vector<PendingRow> rows_;
};

}  // namespace

std::vector<std::string> ParsedDocument::forms() const {
  std::vector<std::string> f;
  f.reserve(words.size());
  for (const auto& w : words) f.push_back(w.form);
  return f;
}

std::vector<ParsedDocument> parse_conllu(std::istream& in, DocumentSplit split) {
  ConlluReader reader(split);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) reader.line(line, ++line_no);
  return reader.finish();
}

std::vector<ParsedDocument> read_conllu(const std::filesystem::path& path, DocumentSplit split) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CoNLL-U file " + path.string());
  auto docs = parse_conllu(in, split);
  if (split == DocumentSplit::kWholeFile && !docs.empty() && docs.front().id.empty()) {
    docs.front().id = path.stem().string();
  }
  return docs;
}

void write_conllu(std::ostream& out, const ParsedDocument& doc) {
  out << "# newdoc id = " << doc.id << '\n';
  std::vector<std::size_t> head_of(doc.words.size(), 0);
  std::vector<std::string> rel_of(doc.words.size(), "root");
  for (const auto& a : doc.arcs) {
    head_of[a.tail_word] = a.head_word + 1;
    rel_of[a.tail_word] = a.relation.empty() ? "dep" : a.relation;
  }
  for (std::size_t s = 0; s < doc.sentence_starts.size(); ++s) {
    const std::size_t begin = doc.sentence_starts[s];
    const std::size_t end = s + 1 < doc.sentence_starts.size() ? doc.sentence_starts[s + 1] : doc.words.size();
    for (std::size_t w = begin; w < end; ++w) {
      const auto& pw = doc.words[w];
      const std::size_t head = head_of[w] == 0 ? 0 : head_of[w] - begin;
      out << (w - begin + 1) << '\t' << pw.form << "\t_\t" << (pw.upos.empty() ? "_" : pw.upos) << '\t'
          << (pw.xpos.empty() ? "_" : pw.xpos) << "\t_\t" << head << '\t' << rel_of[w] << "\t_\t_\n";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> TokenGraph::in_neighbors() const {
  std::vector<std::vector<std::size_t>> nb(n_nodes);
  for (const auto& [u, v] : edges) nb[v].push_back(u);
  return nb;
}

std::vector<std::vector<std::size_t>> TokenGraph::out_neighbors() const {
  std::vector<std::vector<std::size_t>> nb(n_nodes);
  for (const auto& [u, v] : edges) nb[u].push_back(v);
  return nb;
}

std::size_t TokenGraph::weak_component_count() const {
  std::vector<std::size_t> parent(n_nodes);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n_nodes;
  for (const auto& [u, v] : edges) {
    const auto a = find(u);
    const auto b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

TokenGraph TokenGraph::restricted(std::size_t n) const {
  TokenGraph g;
  g.n_nodes = std::min(n, n_nodes);
  for (const auto& e : edges) {
    if (e.first < g.n_nodes && e.second < g.n_nodes) g.edges.push_back(e);
  }
  return g;
}

TokenGraph build_token_graph(std::span<const DepArc> arcs, std::span<const std::size_t> token_to_word) {
  std::size_t n_words = 0;
  for (auto w : token_to_word) n_words = std::max(n_words, w + 1);
  std::vector<std::vector<std::size_t>> pieces(n_words);
  for (std::size_t t = 0; t < token_to_word.size(); ++t) pieces[token_to_word[t]].push_back(t);

  auto pieces_of = [&](std::size_t w) -> const std::vector<std::size_t>& {
    if (w >= pieces.size() || pieces[w].empty()) {
      throw InputError("dependency arc references word " + std::to_string(w) + " which has no tokens");
    }
    return pieces[w];
  };

  TokenGraph g;
  g.n_nodes = token_to_word.size();
  for (const auto& a : arcs) {
    if (a.head_word == a.tail_word) {
      throw InputError("dependency arc is a self-loop on word " + std::to_string(a.head_word));
    }
    for (auto i : pieces_of(a.head_word)) {
      for (auto j : pieces_of(a.tail_word)) g.edges.emplace_back(i, j);
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

double homophily_score(const TokenGraph& graph, std::span<const SpanType> labels) {
  if (labels.size() != graph.n_nodes) {
    throw std::invalid_argument("homophily_score: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(graph.n_nodes) + " nodes");
  }
  if (graph.edges.empty()) throw std::domain_error("homophily undefined for a graph with no edges");
  std::size_t same = 0;
  for (const auto& [u, v] : graph.edges) same += labels[u] == labels[v] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(graph.edges.size());
}

std::string graph_to_json(const TokenGraph& graph) {
  nlohmann::json j;
  j["n_nodes"] = graph.n_nodes;
  j["edges"] = nlohmann::json::array();
  for (const auto& [u, v] : graph.edges) j["edges"].push_back({u, v});
  return j.dump();
}

}  // namespace ces
