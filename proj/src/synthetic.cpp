#include "ces/synthetic.hpp"

#include <array>
#include <cctype>
#include <string_view>

#include "ces/nd/random.hpp"

namespace ces {
namespace {

struct Vocab {
  std::vector<std::string_view> adjectives;
  std::vector<std::string_view> nouns;
  std::vector<std::string_view> verbs;
  std::vector<std::string_view> tails;  // object noun or adverb
  const char* tail_xpos;
  const char* tail_upos;
  const char* tail_rel;
};

const Vocab kCause{
    {"higher", "rising", "weaker", "volatile", "unexpected", "stricter"},
    {"rates", "tariffs", "inflation", "borrowing", "regulation", "competition"},
    {"squeezed", "pressured", "hit", "burdened", "undermined"},
    {"lenders", "exporters", "retailers", "suppliers", "manufacturers"},
    "NNS",
    "NOUN",
    "obj"};

const Vocab kEffect{
    {"quarterly", "annual", "net", "operating", "consolidated"},
    {"profits", "revenue", "margins", "earnings", "dividends", "bookings"},
    {"fell", "declined", "slumped", "shrank", "deteriorated"},
    {"sharply", "significantly", "steadily", "modestly"},
    "RB",
    "ADV",
    "advmod"};

const std::array<std::string_view, 4> kFillerNouns{"trading", "analysts", "investors", "volume"};
const std::array<std::string_view, 4> kFillerAdjectives{"quiet", "cautious", "mixed", "subdued"};

// Sentence under construction; heads are 1-based within the sentence, 0 = root.
struct Sentence {
  std::vector<ParsedWord> words;
  std::vector<std::size_t> heads;
  std::vector<std::string> rels;

  std::size_t add(std::string form, const char* upos, const char* xpos) {
    words.push_back({std::move(form), upos, xpos});
    heads.push_back(0);
    rels.push_back("dep");
    return words.size();
  }
  void attach(std::size_t child, std::size_t head, const char* rel) {
    heads[child - 1] = head;
    rels[child - 1] = rel;
  }
};

struct Clause {
  std::size_t first = 0;  // 1-based index of the first word
  std::size_t last = 0;
  std::size_t verb = 0;
};

template <typename Seq>
std::string_view pick(nd::Rng& rng, const Seq& items) {
  return items[rng.below(items.size())];
}

Clause add_clause(Sentence& s, const Vocab& v, nd::Rng& rng) {
  Clause c;
  const auto adj = s.add(std::string(pick(rng, v.adjectives)), "ADJ", "JJ");
  const auto noun = s.add(std::string(pick(rng, v.nouns)), "NOUN", "NNS");
  const auto verb = s.add(std::string(pick(rng, v.verbs)), "VERB", "VBD");
  const auto tail = s.add(std::string(pick(rng, v.tails)), v.tail_upos, v.tail_xpos);
  s.attach(adj, noun, "amod");
  s.attach(noun, verb, "nsubj");
  s.attach(tail, verb, v.tail_rel);
  c.first = adj;
  c.last = tail;
  c.verb = verb;
  return c;
}

std::string capitalized(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

// Joins forms with single spaces, without a space before punctuation.
std::string render(const std::vector<ParsedWord>& words) {
  std::string out;
  for (const auto& w : words) {
    const bool punct = w.form == "," || w.form == ".";
    if (!out.empty() && !punct) out += ' ';
    out += w.form;
  }
  return out;
}

std::string span_text(const Sentence& s, const Clause& c) {
  std::vector<ParsedWord> words(s.words.begin() + static_cast<std::ptrdiff_t>(c.first - 1),
                                s.words.begin() + static_cast<std::ptrdiff_t>(c.last));
  return render(words);
}

Sentence filler_sentence(nd::Rng& rng) {
  Sentence s;
  const auto noun = s.add(capitalized(std::string(pick(rng, kFillerNouns))), "NOUN", "NN");
  const auto cop = s.add("was", "AUX", "VBD");
  const auto adj = s.add(std::string(pick(rng, kFillerAdjectives)), "ADJ", "JJ");
  const auto dot = s.add(".", "PUNCT", ".");
  s.attach(noun, adj, "nsubj");
  s.attach(cop, adj, "cop");
  s.attach(dot, adj, "punct");
  return s;
}

// Builds the causal sentence for one of the four templates; returns the
// cause and effect span texts.
std::pair<std::string, std::string> causal_sentence(Sentence& s, std::size_t pattern, nd::Rng& rng) {
  Clause cause;
  Clause effect;
  switch (pattern) {
    case 0: {  // E because C.
      effect = add_clause(s, kEffect, rng);
      const auto cue = s.add("because", "SCONJ", "IN");
      cause = add_clause(s, kCause, rng);
      s.attach(cue, cause.verb, "mark");
      s.attach(cause.verb, effect.verb, "advcl");
      s.attach(s.add(".", "PUNCT", "."), effect.verb, "punct");
      break;
    }
    case 1: {  // C, so E.
      cause = add_clause(s, kCause, rng);
      const auto comma = s.add(",", "PUNCT", ",");
      const auto cue = s.add("so", "SCONJ", "IN");
      effect = add_clause(s, kEffect, rng);
      s.attach(comma, effect.verb, "punct");
      s.attach(cue, effect.verb, "mark");
      s.attach(effect.verb, cause.verb, "advcl");
      s.attach(s.add(".", "PUNCT", "."), cause.verb, "punct");
      break;
    }
    case 2: {  // Due to C, E.
      const auto due = s.add("due", "ADP", "IN");
      const auto to = s.add("to", "ADP", "TO");
      cause = add_clause(s, kCause, rng);
      const auto comma = s.add(",", "PUNCT", ",");
      effect = add_clause(s, kEffect, rng);
      s.attach(due, cause.verb, "mark");
      s.attach(to, due, "fixed");
      s.attach(comma, effect.verb, "punct");
      s.attach(cause.verb, effect.verb, "advcl");
      s.attach(s.add(".", "PUNCT", "."), effect.verb, "punct");
      break;
    }
    default: {  // E as a result of C.
      effect = add_clause(s, kEffect, rng);
      const auto as = s.add("as", "ADP", "IN");
      const auto a = s.add("a", "DET", "DT");
      const auto result = s.add("result", "NOUN", "NN");
      const auto of = s.add("of", "ADP", "IN");
      cause = add_clause(s, kCause, rng);
      s.attach(as, result, "case");
      s.attach(a, result, "det");
      s.attach(of, result, "case");
      s.attach(result, cause.verb, "mark");
      s.attach(cause.verb, effect.verb, "advcl");
      s.attach(s.add(".", "PUNCT", "."), effect.verb, "punct");
      break;
    }
  }
  s.words[0].form = capitalized(s.words[0].form);
  return {span_text(s, cause), span_text(s, effect)};
}

}  // namespace

std::vector<std::string> split_pieces(const std::string& word) {
  if (word.size() < 8) return {word};
  std::vector<std::string> pieces{word.substr(0, 4)};
  for (std::size_t at = 4; at < word.size(); at += 6) pieces.push_back("##" + word.substr(at, 6));
  return pieces;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options) {
  SyntheticCorpus corpus;
  nd::Rng rng(options.seed, "synthetic");
  for (std::size_t k = 0; k < options.count; ++k) {
    std::vector<Sentence> sentences;
    if (rng.uniform() < options.filler_probability) sentences.push_back(filler_sentence(rng));
    Sentence main;
    const auto [cause, effect] = causal_sentence(main, rng.below(4), rng);
    sentences.push_back(std::move(main));

    RawExample ex;
    ex.id = "syn." + std::to_string(k / 10) + "." + std::to_string(k % 10);
    ex.cause = cause;
    ex.effect = effect;
    ParsedDocument doc;
    doc.id = ex.id;
    for (const auto& s : sentences) {
      if (!ex.text.empty()) ex.text += ' ';
      ex.text += render(s.words);
      const std::size_t base = doc.words.size();
      doc.sentence_starts.push_back(base);
      for (std::size_t i = 0; i < s.words.size(); ++i) {
        doc.words.push_back(s.words[i]);
        if (s.heads[i] != 0) doc.arcs.push_back({base + s.heads[i] - 1, base + i, s.rels[i]});
      }
    }

    Tokenization tok;
    tok.id = ex.id;
    tok.words = align_words(ex.text, doc.forms());
    for (std::size_t w = 0; w < tok.words.size(); ++w) {
      tok.words[w].pos = doc.words[w].xpos;
      const auto pieces = options.subword_splits ? split_pieces(tok.words[w].surface)
                                                 : std::vector<std::string>{tok.words[w].surface};
      for (const auto& p : pieces) tok.tokens.push_back({p, w});
    }

    corpus.examples.push_back(std::move(ex));
    corpus.parses.push_back(std::move(doc));
    corpus.tokenizations.push_back(std::move(tok));
  }
  return corpus;
}

}  // namespace ces
