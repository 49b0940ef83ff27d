#include "ces/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ces/error.hpp"

namespace ces {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Reads one CSV record (RFC 4180 quoting, embedded newlines allowed).
// Returns false at end of input. `line` is advanced by the physical lines read.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields,
                 std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const std::size_t start_line = line + 1;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) {
    throw InputError("dataset row starting at line " + std::to_string(start_line) +
                     ": unterminated quoted field");
  }
  if (!any) return false;
  ++line;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  return true;
}

void write_field(std::ostream& out, std::string_view v, char delim) {
  const bool quote = v.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
  if (!quote) {
    out << v;
    return;
  }
  out << '"';
  for (char c : v) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

bool is_blank_record(const std::vector<std::string>& fields) {
  return std::all_of(fields.begin(), fields.end(),
                     [](const std::string& f) { return trim(f).empty(); });
}

}  // namespace

// ---------------------------------------------------------------------------
// LabeledExample

std::vector<std::optional<std::size_t>> LabeledExample::first_token_of_word() const {
  std::vector<std::optional<std::size_t>> first(words.size());
  for (std::size_t t = 0; t < token_to_word.size(); ++t) {
    auto& slot = first[token_to_word[t]];
    if (!slot) slot = t;
  }
  return first;
}

std::vector<LabelTag> LabeledExample::word_labels() const {
  std::vector<LabelTag> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.label);
  return out;
}

// ---------------------------------------------------------------------------
// PosVocab

PosVocab PosVocab::build(std::span<const std::string> tags, std::size_t capacity) {
  PosVocab v;
  for (const auto& t : tags) {
    if (t.empty() || v.index_.count(t) != 0) continue;
    if (v.tags_.size() == capacity) {
      throw InputError("POS vocabulary exceeds capacity " + std::to_string(capacity) +
                       " (offending tag '" + t + "')");
    }
    v.index_.emplace(t, v.tags_.size());
    v.tags_.push_back(t);
  }
  return v;
}

std::optional<std::size_t> PosVocab::index(std::string_view tag) const {
  auto it = index_.find(std::string(tag));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Dataset CSV

std::vector<RawExample> parse_dataset(std::istream& in, char delimiter) {
  std::vector<RawExample> out;
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!read_record(in, delimiter, fields, line)) return out;

  int col_index = -1, col_text = -1, col_cause = -1, col_effect = -1;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name = trim(fields[i]);
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name = name.substr(3);
    if (name == "Index") col_index = static_cast<int>(i);
    else if (name == "Text") col_text = static_cast<int>(i);
    else if (name == "Cause") col_cause = static_cast<int>(i);
    else if (name == "Effect") col_effect = static_cast<int>(i);
  }
  if (col_index < 0 || col_text < 0) {
    throw InputError("dataset header must contain Index and Text columns");
  }
  const std::size_t n_cols = fields.size();

  std::set<std::string> seen;
  std::size_t row = 0;
  while (true) {
    const std::size_t row_line = line + 1;
    if (!read_record(in, delimiter, fields, line)) break;
    ++row;
    if (is_blank_record(fields)) continue;
    if (fields.size() != n_cols) {
      throw InputError("dataset row " + std::to_string(row) + " (line " + std::to_string(row_line) +
                       "): expected " + std::to_string(n_cols) + " fields, got " +
                       std::to_string(fields.size()));
    }
    RawExample ex;
    ex.id = trim(fields[col_index]);
    ex.text = trim(fields[col_text]);
    if (col_cause >= 0) ex.cause = trim(fields[col_cause]);
    if (col_effect >= 0) ex.effect = trim(fields[col_effect]);
    if (ex.id.empty()) {
      throw InputError("dataset row " + std::to_string(row) + ": empty Index");
    }
    if (!seen.insert(ex.id).second) {
      throw InputError("dataset row " + std::to_string(row) + ": duplicate Index '" + ex.id + "'");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<RawExample> read_dataset(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path.string());
  return parse_dataset(in, delimiter);
}

void write_dataset(std::ostream& out, std::span<const RawExample> examples, char delimiter) {
  out << "Index" << delimiter << "Text" << delimiter << "Cause" << delimiter << "Effect\n";
  for (const auto& ex : examples) {
    write_field(out, ex.id, delimiter);
    out << delimiter;
    write_field(out, ex.text, delimiter);
    out << delimiter;
    write_field(out, ex.cause, delimiter);
    out << delimiter;
    write_field(out, ex.effect, delimiter);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Span location and BIO encoding

SpanRanges locate_spans(const RawExample& ex) {
  auto first = [&](const std::string& s, const char* what) -> std::optional<CharRange> {
    if (s.empty()) return std::nullopt;
    const auto pos = ex.text.find(s);
    if (pos == std::string::npos) {
      throw InputError("example " + ex.id + ": " + what + " not found in text");
    }
    return CharRange{pos, pos + s.size()};
  };
  SpanRanges r{first(ex.cause, "cause"), first(ex.effect, "effect")};
  if (!r.cause || !r.effect || !r.cause->intersects(*r.effect)) return r;

  // Overlap: slide the shorter span (cause on ties) to later occurrences.
  const bool move_cause = ex.cause.size() <= ex.effect.size();
  const std::string& mover = move_cause ? ex.cause : ex.effect;
  CharRange& moving = move_cause ? *r.cause : *r.effect;
  const CharRange fixed = move_cause ? *r.effect : *r.cause;
  for (auto pos = ex.text.find(mover, moving.begin + 1); pos != std::string::npos;
       pos = ex.text.find(mover, pos + 1)) {
    CharRange cand{pos, pos + mover.size()};
    if (!cand.intersects(fixed)) {
      moving = cand;
      return r;
    }
  }
  throw InputError("example " + ex.id + ": cause and effect cannot be placed disjointly");
}

std::vector<Word> segment_words(std::string_view text) {
  std::vector<Word> words;
  auto emit = [&](std::size_t b, std::size_t e) {
    words.push_back(Word{std::string(text.substr(b, e - b)), b, e, {}, LabelTag::kOutside});
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;

    std::size_t core_b = i;
    std::size_t core_e = end;
    while (core_b < core_e && is_punct(text[core_b])) ++core_b;
    while (core_e > core_b && is_punct(text[core_e - 1])) --core_e;
    for (std::size_t p = i; p < core_b; ++p) emit(p, p + 1);
    if (core_b < core_e) emit(core_b, core_e);
    for (std::size_t p = std::max(core_e, core_b); p < end; ++p) emit(p, p + 1);
    i = end;
  }
  return words;
}

std::vector<Word> align_words(std::string_view text, std::span<const std::string> forms) {
  std::vector<Word> words;
  words.reserve(forms.size());
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < forms.size(); ++k) {
    const auto& f = forms[k];
    if (f.empty()) throw InputError("empty word form at position " + std::to_string(k));
    const auto pos = text.find(f, cursor);
    if (pos == std::string_view::npos) {
      throw InputError("word '" + f + "' (position " + std::to_string(k) +
                       ") cannot be aligned to the text");
    }
    for (std::size_t p = cursor; p < pos; ++p) {
      if (!is_space(text[p])) {
        throw InputError("word '" + f + "' (position " + std::to_string(k) +
                         ") skips non-space text at offset " + std::to_string(p));
      }
    }
    words.push_back(Word{f, pos, pos + f.size(), {}, LabelTag::kOutside});
    cursor = pos + f.size();
  }
  return words;
}

std::vector<Word> encode_bio(std::vector<Word> words, const SpanRanges& spans) {
  bool cause_started = false;
  bool effect_started = false;
  for (auto& w : words) {
    const CharRange wr{w.char_start, w.char_end};
    const bool in_cause = spans.cause && wr.intersects(*spans.cause);
    const bool in_effect = spans.effect && wr.intersects(*spans.effect);
    if (in_cause && in_effect) {
      throw InputError("word '" + w.surface + "' at offset " + std::to_string(w.char_start) +
                       " intersects both cause and effect");
    }
    if (in_cause) {
      w.label = cause_started ? LabelTag::kInsideCause : LabelTag::kBeginCause;
      cause_started = true;
    } else if (in_effect) {
      w.label = effect_started ? LabelTag::kInsideEffect : LabelTag::kBeginEffect;
      effect_started = true;
    } else {
      w.label = LabelTag::kOutside;
    }
  }
  return words;
}

std::vector<Token> whitespace_tokens(std::span<const Word> words) {
  std::vector<Token> toks;
  toks.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) toks.push_back(Token{words[i].surface, i});
  return toks;
}

LabeledExample align_to_tokens(const RawExample& ex, std::vector<Word> words,
                               std::span<const Token> tokens, std::size_t max_seq_len) {
  LabeledExample out;
  out.id = ex.id;
  out.text = ex.text;
  out.untruncated_token_count = tokens.size();

  std::vector<std::size_t> pieces_per_word(words.size(), 0);
  std::size_t prev_word = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto w = tokens[t].word_index;
    if (w >= words.size()) {
      throw InputError("example " + ex.id + ": token " + std::to_string(t) + " ('" +
                       tokens[t].piece + "') has no source word");
    }
    if (w < prev_word) {
      throw InputError("example " + ex.id + ": token-to-word map is not monotone at token " +
                       std::to_string(t));
    }
    prev_word = w;
    ++pieces_per_word[w];
  }
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (pieces_per_word[w] == 0) {
      throw InputError("example " + ex.id + ": word " + std::to_string(w) + " ('" +
                       words[w].surface + "') has no tokens");
    }
  }

  const std::size_t kept = std::min(tokens.size(), max_seq_len);
  out.tokens.reserve(kept);
  out.token_to_word.reserve(kept);
  out.token_labels.reserve(kept);
  for (std::size_t t = 0; t < kept; ++t) {
    const auto w = tokens[t].word_index;
    const bool first_piece = t == 0 || tokens[t - 1].word_index != w;
    LabelTag label = words[w].label;
    if (!first_piece && is_begin(label)) label = inside_tag(collapse(label));
    out.tokens.push_back(tokens[t].piece);
    out.token_to_word.push_back(w);
    out.token_labels.push_back(label);
  }
  out.words = std::move(words);
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

std::vector<LabelTag> lift_to_words(const LabeledExample& ex, std::span<const LabelTag> token_tags) {
  if (token_tags.size() != ex.tokens.size()) {
    throw std::invalid_argument("lift_to_words: expected " + std::to_string(ex.tokens.size()) +
                                " token tags, got " + std::to_string(token_tags.size()));
  }
  std::vector<LabelTag> word_tags(ex.words.size(), LabelTag::kOutside);
  const auto first = ex.first_token_of_word();
  for (std::size_t w = 0; w < ex.words.size(); ++w) {
    if (first[w]) word_tags[w] = token_tags[*first[w]];
  }
  return word_tags;
}

DecodedSpans spans_from_word_tags(const LabeledExample& ex, std::span<const LabelTag> word_tags) {
  if (word_tags.size() != ex.words.size()) {
    throw std::invalid_argument("spans_from_word_tags: tag count does not match word count");
  }
  struct Run {
    std::size_t begin = 0, end = 0;
  };
  std::optional<Run> best[2];
  std::optional<Run> current;
  SpanType current_type = SpanType::kOther;

  auto close = [&]() {
    if (!current) return;
    auto& slot = best[static_cast<std::size_t>(current_type)];
    if (!slot || current->end - current->begin > slot->end - slot->begin) slot = current;
    current.reset();
  };

  for (std::size_t w = 0; w < word_tags.size(); ++w) {
    const LabelTag tag = word_tags[w];
    const SpanType type = collapse(tag);
    if (type == SpanType::kOther) {
      close();
      continue;
    }
    if (current && type == current_type && !is_begin(tag)) {
      current->end = w + 1;
      continue;
    }
    close();
    current = Run{w, w + 1};
    current_type = type;
  }
  close();

  auto text_of = [&](const std::optional<Run>& r) -> std::string {
    if (!r) return {};
    const auto b = ex.words[r->begin].char_start;
    const auto e = ex.words[r->end - 1].char_end;
    return ex.text.substr(b, e - b);
  };
  return DecodedSpans{text_of(best[0]), text_of(best[1])};
}

DecodedSpans decode_spans(const LabeledExample& ex, std::span<const LabelTag> predicted) {
  const auto word_tags = lift_to_words(ex, predicted);
  return spans_from_word_tags(ex, word_tags);
}

// ---------------------------------------------------------------------------
// Tokenization JSON lines

std::vector<Tokenization> read_tokenization(std::istream& in) {
  std::vector<Tokenization> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "tokenization line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      Tokenization tok;
      tok.id = j.at("id").get<std::string>();
      for (const auto& jw : j.at("words")) {
        Word w;
        w.surface = jw.at("surface").get<std::string>();
        w.char_start = jw.at("start").get<std::size_t>();
        w.char_end = jw.at("end").get<std::size_t>();
        if (jw.contains("pos") && !jw.at("pos").is_null()) w.pos = jw.at("pos").get<std::string>();
        if (w.char_start >= w.char_end) throw InputError(where + ": word with empty range");
        if (!tok.words.empty() && tok.words.back().char_end > w.char_start) {
          throw InputError(where + ": words overlap or are unsorted");
        }
        tok.words.push_back(std::move(w));
      }
      for (const auto& jt : j.at("tokens")) {
        Token t{jt.at("piece").get<std::string>(), jt.at("word_index").get<std::size_t>()};
        if (t.word_index >= tok.words.size()) {
          throw InputError(where + ": token '" + t.piece + "' references missing word");
        }
        tok.tokens.push_back(std::move(t));
      }
      out.push_back(std::move(tok));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<Tokenization> read_tokenization(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open tokenization file " + path.string());
  return read_tokenization(in);
}

void write_tokenization(std::ostream& out, const Tokenization& tok) {
  nlohmann::json j;
  j["id"] = tok.id;
  j["words"] = nlohmann::json::array();
  for (const auto& w : tok.words) {
    j["words"].push_back({{"surface", w.surface}, {"start", w.char_start}, {"end", w.char_end}, {"pos", w.pos}});
  }
  j["tokens"] = nlohmann::json::array();
  for (const auto& t : tok.tokens) {
    j["tokens"].push_back({{"piece", t.piece}, {"word_index", t.word_index}});
  }
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Labels

std::string_view to_string(LabelTag t) {
  switch (t) {
    case LabelTag::kBeginCause: return "B-C";
    case LabelTag::kInsideCause: return "I-C";
    case LabelTag::kBeginEffect: return "B-E";
    case LabelTag::kInsideEffect: return "I-E";
    case LabelTag::kOutside: return "O";
  }
  return "?";
}

std::string_view to_string(SpanType s) {
  switch (s) {
    case SpanType::kCause: return "C";
    case SpanType::kEffect: return "E";
    case SpanType::kOther: return "O";
  }
  return "?";
}

std::optional<LabelTag> parse_tag(std::string_view s) {
  for (auto t : kAllTags) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

}  // namespace ces
