#pragma once

// Generators and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ces/corpus.hpp"
#include "ces/depgraph.hpp"
#include "ces/metrics.hpp"
#include "ces/nd/random.hpp"
#include "ces/viterbi.hpp"

namespace ces::testing {

// A document plus the subword split used for it.
struct GeneratedDoc {
  RawExample raw;
  std::vector<Word> words;    // as segment_words sees the text
  std::vector<Token> tokens;  // random subword pieces
};

// Words are 3-letter strings over {a, b, c}, so duplicate substrings are
// common and every letter run has the same length. Punctuation is glued to
// words and split off by segmentation; gaps are one to three spaces.
inline GeneratedDoc generate_doc(nd::Rng& rng, std::size_t index) {
  static constexpr std::array<char, 3> kLetters{'a', 'b', 'c'};
  const std::size_t n_words = 2 + rng.below(14);
  std::string text;
  for (std::size_t w = 0; w < n_words; ++w) {
    if (w > 0) text.append(1 + rng.below(3), ' ');
    if (rng.below(10) == 0) text += '(';
    for (int k = 0; k < 3; ++k) text += kLetters[rng.below(3)];
    const auto r = rng.below(10);
    if (r == 0) text += ',';
    if (r == 1) text += '.';
  }

  GeneratedDoc doc;
  doc.raw.id = "gen." + std::to_string(index);
  doc.raw.text = text;
  doc.words = segment_words(text);

  // Two disjoint word ranges, either possibly absent.
  const std::size_t n = doc.words.size();
  auto range_text = [&](std::size_t b, std::size_t e) {
    return text.substr(doc.words[b].char_start, doc.words[e - 1].char_end - doc.words[b].char_start);
  };
  const std::size_t cut = 1 + rng.below(n - 1);
  std::pair<std::size_t, std::size_t> left{0, cut};
  std::pair<std::size_t, std::size_t> right{cut, n};
  auto shrink = [&](std::pair<std::size_t, std::size_t> r) {
    const std::size_t len = r.second - r.first;
    const std::size_t b = r.first + rng.below(len);
    const std::size_t e = b + 1 + rng.below(r.second - b);
    return std::pair{b, e};
  };
  const auto a = shrink(left);
  const auto b = shrink(right);
  const bool cause_first = rng.below(2) == 0;
  const auto c = cause_first ? a : b;
  const auto e = cause_first ? b : a;
  if (rng.below(12) != 0) doc.raw.cause = range_text(c.first, c.second);
  if (rng.below(12) != 0) doc.raw.effect = range_text(e.first, e.second);

  for (std::size_t w = 0; w < n; ++w) {
    const auto& s = doc.words[w].surface;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const std::size_t len = 1 + rng.below(s.size() - pos);
      doc.tokens.push_back(Token{(pos == 0 ? "" : "##") + s.substr(pos, len), w});
      pos += len;
    }
  }
  return doc;
}

// A parsed document with random projective-or-not trees per sentence.
struct GeneratedParse {
  ParsedDocument parse;
  std::vector<std::size_t> token_to_word;
  std::vector<std::vector<std::size_t>> pieces;  // tokens of each word
};

inline GeneratedParse generate_parse(nd::Rng& rng, std::size_t max_sentences = 4) {
  GeneratedParse g;
  const std::size_t sentences = 1 + rng.below(max_sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t offset = g.parse.words.size();
    const std::size_t len = 1 + rng.below(7);
    g.parse.sentence_starts.push_back(offset);
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    // order[0] is the root; every later word hangs off an earlier one.
    for (std::size_t k = 1; k < len; ++k) {
      const std::size_t head = order[rng.below(k)];
      g.parse.arcs.push_back(DepArc{offset + head, offset + order[k], "dep"});
    }
    for (std::size_t k = 0; k < len; ++k) {
      g.parse.words.push_back(ParsedWord{"w" + std::to_string(offset + k), "X", "X"});
    }
  }
  std::size_t t = 0;
  for (std::size_t w = 0; w < g.parse.words.size(); ++w) {
    const std::size_t k = 1 + rng.below(3);
    g.pieces.emplace_back();
    for (std::size_t j = 0; j < k; ++j) {
      g.token_to_word.push_back(w);
      g.pieces.back().push_back(t++);
    }
  }
  return g;
}

// Weakly connected components by repeated flood fill.
inline std::size_t count_components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(n, false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return count;
}

// Naive confusion-matrix scoring.
struct NaiveScores {
  double precision = 0, recall = 0, f1 = 0, exact_match = 0;
};

inline NaiveScores naive_scores(const std::vector<WordLabels>& gold, const std::vector<WordLabels>& pred) {
  std::array<std::array<std::size_t, 3>, 3> m{};  // m[gold][pred]
  std::size_t total = 0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool all = true;
    for (std::size_t w = 0; w < gold[i].size(); ++w) {
      ++m[static_cast<int>(gold[i][w])][static_cast<int>(pred[i][w])];
      ++total;
      all = all && gold[i][w] == pred[i][w];
    }
    exact += all ? 1 : 0;
  }
  NaiveScores s;
  double ps = 0, rs = 0, fs = 0;
  for (int c = 0; c < 3; ++c) {
    const std::size_t tp = m[c][c];
    const std::size_t row = m[c][0] + m[c][1] + m[c][2];
    const std::size_t col = m[0][c] + m[1][c] + m[2][c];
    const double p = col ? double(tp) / double(col) : 0.0;
    const double r = row ? double(tp) / double(row) : 0.0;
    const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    ps += double(row) * p;
    rs += double(row) * r;
    fs += double(row) * f;
  }
  if (total) {
    s.precision = 100.0 * ps / double(total);
    s.recall = 100.0 * rs / double(total);
    s.f1 = 100.0 * fs / double(total);
  }
  s.exact_match = gold.empty() ? 0.0 : 100.0 * double(exact) / double(gold.size());
  return s;
}

// Random per-word labels; `noise` is the chance a predicted word differs.
inline std::pair<std::vector<WordLabels>, std::vector<WordLabels>> random_labelings(nd::Rng& rng) {
  const std::size_t examples = 1 + rng.below(12);
  const double noise = rng.uniform();
  std::vector<WordLabels> gold(examples), pred(examples);
  for (std::size_t i = 0; i < examples; ++i) {
    const std::size_t words = 1 + rng.below(10);
    for (std::size_t w = 0; w < words; ++w) {
      const auto g = static_cast<SpanType>(rng.below(3));
      gold[i].push_back(g);
      pred[i].push_back(rng.uniform() < noise ? static_cast<SpanType>(rng.below(3)) : g);
    }
  }
  return {gold, pred};
}

// Random emissions and transitions. Integer-valued scores on a coarse grid
// make exact ties frequent.
inline std::pair<Emissions, TransitionModel> random_decode_instance(nd::Rng& rng, std::size_t n, bool ties) {
  Emissions e(n);
  for (auto& row : e) {
    for (auto& v : row) v = ties ? -static_cast<double>(rng.below(3)) : std::log(rng.uniform(0.01, 1.0));
  }
  TransitionCounts counts;
  for (auto& v : counts.start) v = static_cast<double>(rng.below(ties ? 2 : 6));
  for (auto& row : counts.bigram) {
    for (auto& v : row) v = static_cast<double>(rng.below(ties ? 2 : 6));
  }
  return {e, TransitionModel::from_counts(counts)};
}

inline bool path_is_legal(std::span<const LabelTag> path) {
  if (path.empty()) return true;
  if (!start_allowed(path[0])) return false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (!transition_allowed(path[i - 1], path[i])) return false;
  }
  return true;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    nd::Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() / ("ces-" + tag + "-" + std::to_string(rng.next() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ces::testing
