#include <doctest.h>

#include <sstream>

#include "ces/corpus.hpp"
#include "ces/error.hpp"
#include "support.hpp"

using namespace ces;

namespace {

std::vector<Word> words_of(std::string_view text) { return segment_words(text); }

std::vector<LabelTag> labels(const std::vector<Word>& ws) {
  std::vector<LabelTag> out;
  for (const auto& w : ws) out.push_back(w.label);
  return out;
}

constexpr auto BC = LabelTag::kBeginCause;
constexpr auto IC = LabelTag::kInsideCause;
constexpr auto BE = LabelTag::kBeginEffect;
constexpr auto IE = LabelTag::kInsideEffect;
constexpr auto O = LabelTag::kOutside;

}  // namespace

TEST_CASE("parse_dataset maps fields and trims") {
  std::istringstream in("Index; Text; Cause; Effect\n0001.1; A. B. ; A.; B.\n0001.2;plain text;;\n");
  const auto rows = parse_dataset(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].id == "0001.1");
  CHECK(rows[0].text == "A. B.");
  CHECK(rows[0].cause == "A.");
  CHECK(rows[0].effect == "B.");
  CHECK(rows[1].cause.empty());
  CHECK(rows[1].effect.empty());
}

TEST_CASE("parse_dataset without span columns") {
  std::istringstream in("Index;Text\nx;some text\n");
  const auto rows = parse_dataset(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].cause.empty());
}

TEST_CASE("parse_dataset quoted fields round trip") {
  std::vector<RawExample> rows{{"a", "x; \"quoted\" y", "x", "\"quoted\" y"}, {"b", "line\nbreak", "", "break"}};
  std::ostringstream out;
  write_dataset(out, rows);
  std::istringstream in(out.str());
  const auto back = parse_dataset(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].text == rows[0].text);
  CHECK(back[0].effect == rows[0].effect);
  CHECK(back[1].text == rows[1].text);
}

TEST_CASE("parse_dataset errors") {
  SUBCASE("duplicate id") {
    std::istringstream in("Index;Text\na;x\na;y\n");
    CHECK_THROWS_AS(parse_dataset(in), InputError);
  }
  SUBCASE("row with too many fields names the row") {
    std::istringstream in("Index;Text;Cause;Effect\na;x;;;extra\n");
    try {
      parse_dataset(in);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
  }
  SUBCASE("missing header columns") {
    std::istringstream in("Id;Body\na;x\n");
    CHECK_THROWS_AS(parse_dataset(in), InputError);
  }
  SUBCASE("empty input is an empty dataset") {
    std::istringstream in("");
    CHECK(parse_dataset(in).empty());
  }
}

TEST_CASE("locate_spans") {
  SUBCASE("unique occurrences") {
    const auto r = locate_spans({"1", "X because Y", "Y", "X"});
    CHECK(r.effect == CharRange{0, 1});
    CHECK(r.cause == CharRange{10, 11});
  }
  SUBCASE("overlap falls back to the next occurrence of the shorter span") {
    const auto r = locate_spans({"1", "aa b aa", "aa", "aa b"});
    CHECK(r.effect == CharRange{0, 4});
    CHECK(r.cause == CharRange{5, 7});
  }
  SUBCASE("absent substring") { CHECK_THROWS_AS(locate_spans({"1", "aa b", "zz", ""}), InputError); }
  SUBCASE("no disjoint placement") { CHECK_THROWS_AS(locate_spans({"1", "ab", "ab", "b"}), InputError); }
  SUBCASE("empty spans are absent") {
    const auto r = locate_spans({"1", "text", "", ""});
    CHECK_FALSE(r.cause.has_value());
    CHECK_FALSE(r.effect.has_value());
  }
}

TEST_CASE("locate_spans agrees with an occurrence-pair search") {
  // Oracle: the first occurrence of the longer span, paired with the first
  // disjoint occurrence of the shorter one.
  nd::Rng rng(5, "locate");
  auto occurrences = [](const std::string& text, const std::string& s) {
    std::vector<std::size_t> out;
    for (auto p = text.find(s); p != std::string::npos; p = text.find(s, p + 1)) out.push_back(p);
    return out;
  };
  std::size_t checked = 0;
  for (int k = 0; k < 300; ++k) {
    std::string text;
    const auto len = 3 + rng.below(10);
    for (std::size_t i = 0; i < len; ++i) text += "ab "[rng.below(3)];
    const auto cb = rng.below(len), eb = rng.below(len);
    const std::string cause = text.substr(cb, 1 + rng.below(len - cb));
    const std::string effect = text.substr(eb, 1 + rng.below(len - eb));
    RawExample ex{"r", text, cause, effect};
    const auto co = occurrences(text, cause), eo = occurrences(text, effect);
    const bool cause_longer = cause.size() > effect.size();
    const auto& longer = cause_longer ? cause : effect;
    const auto& shorter_occ = cause_longer ? eo : co;
    const auto& shorter = cause_longer ? effect : cause;
    const std::size_t lb = (cause_longer ? co : eo).front();
    std::optional<std::size_t> sb;
    for (auto p : shorter_occ) {
      if (p + shorter.size() <= lb || lb + longer.size() <= p) {
        sb = p;
        break;
      }
    }
    if (!sb) {
      CHECK_THROWS_AS(locate_spans(ex), InputError);
      continue;
    }
    const auto r = locate_spans(ex);
    const CharRange lr{lb, lb + longer.size()}, sr{*sb, *sb + shorter.size()};
    CHECK(*r.cause == (cause_longer ? lr : sr));
    CHECK(*r.effect == (cause_longer ? sr : lr));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("segment_words splits punctuation and records byte offsets") {
  const auto ws = words_of("Profits (fell), sharply.");
  std::vector<std::string> surfaces;
  for (const auto& w : ws) surfaces.push_back(w.surface);
  CHECK(surfaces == std::vector<std::string>{"Profits", "(", "fell", ")", ",", "sharply", "."});
  CHECK(ws[2].char_start == 9);
  CHECK(ws[2].char_end == 13);

  const auto u = words_of("caf\xc3\xa9 ok");
  REQUIRE(u.size() == 2);
  CHECK(u[0].char_end == 5);
  CHECK(u[1].char_start == 6);
}

TEST_CASE("align_words follows external forms") {
  const auto ws = align_words("can't stop", std::vector<std::string>{"ca", "n't", "stop"});
  REQUIRE(ws.size() == 3);
  CHECK(ws[1].char_start == 2);
  CHECK(ws[2].char_start == 6);
  CHECK_THROWS_AS(align_words("abc", std::vector<std::string>{"abd"}), InputError);
}

TEST_CASE("encode_bio") {
  SUBCASE("one-word spans") {
    RawExample ex{"1", "X because Y", "Y", "X"};
    CHECK(labels(encode_bio(words_of(ex.text), locate_spans(ex))) == std::vector{BE, O, BC});
  }
  SUBCASE("two-word spans") {
    RawExample ex{"1", "A B C D", "A B", "C D"};
    CHECK(labels(encode_bio(words_of(ex.text), locate_spans(ex))) == std::vector{BC, IC, BE, IE});
  }
  SUBCASE("no spans") {
    RawExample ex{"1", "A B", "", ""};
    CHECK(labels(encode_bio(words_of(ex.text), locate_spans(ex))) == std::vector{O, O});
  }
  SUBCASE("word touching both spans") {
    SpanRanges s{CharRange{0, 2}, CharRange{2, 4}};
    CHECK_THROWS_AS(encode_bio(words_of("abcd"), s), InputError);
  }
}

TEST_CASE("align_to_tokens") {
  SUBCASE("single piece keeps B") {
    RawExample ex{"1", "Y", "Y", ""};
    auto ws = encode_bio(words_of(ex.text), locate_spans(ex));
    const auto le = align_to_tokens(ex, ws, whitespace_tokens(ws));
    CHECK(le.token_labels == std::vector{BC});
  }
  SUBCASE("continuation pieces become I") {
    RawExample ex{"1", "lossmaking", "lossmaking", ""};
    auto ws = encode_bio(words_of(ex.text), locate_spans(ex));
    std::vector<Token> toks{{"loss", 0}, {"##making", 0}};
    const auto le = align_to_tokens(ex, ws, toks);
    CHECK(le.tokens == std::vector<std::string>{"loss", "##making"});
    CHECK(le.token_labels == std::vector{BC, IC});
  }
  SUBCASE("truncation keeps max_seq_len tokens") {
    std::string text;
    for (int i = 0; i < 400; ++i) text += (i ? " w" : "w");
    RawExample ex{"1", text, "", ""};
    auto ws = words_of(text);
    const auto le = align_to_tokens(ex, ws, whitespace_tokens(ws), 350);
    CHECK(le.tokens.size() == 350);
    CHECK(le.untruncated_token_count == 400);
    CHECK(le.words.size() == 400);
    const auto first = le.first_token_of_word();
    CHECK(first[349].has_value());
    CHECK_FALSE(first[350].has_value());
  }
  SUBCASE("token without a source word") {
    RawExample ex{"1", "a", "", ""};
    std::vector<Token> toks{{"a", 0}, {"b", 3}};
    CHECK_THROWS_AS(align_to_tokens(ex, words_of("a"), toks), InputError);
  }
}

TEST_CASE("decode_spans") {
  RawExample ex{"1", "aa bb cc dd", "", ""};
  auto ws = words_of(ex.text);
  const auto le = align_to_tokens(ex, ws, whitespace_tokens(ws));
  SUBCASE("leading I starts a span") {
    CHECK(spans_from_word_tags(le, std::vector{IC, IC, O, O}).cause == "aa bb");
  }
  SUBCASE("longest run wins") {
    CHECK(spans_from_word_tags(le, std::vector{BC, O, BC, IC}).cause == "cc dd");
  }
  SUBCASE("equal runs keep the earliest") {
    CHECK(spans_from_word_tags(le, std::vector{BE, O, BE, O}).effect == "aa");
  }
  SUBCASE("a B tag starts a new run") {
    CHECK(spans_from_word_tags(le, std::vector{BC, BC, IC, O}).cause == "bb cc");
  }
}

TEST_CASE("round trip and label propagation on generated documents") {
  nd::Rng rng(11, "corpus-roundtrip");
  std::size_t checked = 0;
  for (std::size_t k = 0; k < 300; ++k) {
    const auto doc = testing::generate_doc(rng, k);
    SpanRanges spans;
    try {
      spans = locate_spans(doc.raw);
    } catch (const InputError&) {
      continue;
    }
    const auto words = encode_bio(doc.words, spans);
    const auto le = align_to_tokens(doc.raw, words, doc.tokens, 1000);
    const auto decoded = decode_spans(le, le.token_labels);
    CHECK(decoded.cause == doc.raw.cause);
    CHECK(decoded.effect == doc.raw.effect);

    // A B tag sits only on a word's first token.
    for (std::size_t t = 0; t < le.tokens.size(); ++t) {
      if (is_begin(le.token_labels[t])) CHECK((t == 0 || le.token_to_word[t - 1] != le.token_to_word[t]));
    }
    // Collapsing then lifting equals lifting then collapsing.
    const auto lifted = lift_to_words(le, le.token_labels);
    std::vector<SpanType> a, b;
    for (auto t : lifted) a.push_back(collapse(t));
    const auto first = le.first_token_of_word();
    for (std::size_t w = 0; w < le.words.size(); ++w) b.push_back(collapse(le.token_labels[*first[w]]));
    CHECK(a == b);
    // At most one B per span type.
    std::size_t bc = 0, be = 0;
    for (auto t : lifted) {
      bc += t == BC;
      be += t == BE;
    }
    CHECK(bc <= 1);
    CHECK(be <= 1);
    ++checked;
  }
  CHECK(checked > 250);
}

TEST_CASE("tokenization JSON lines round trip") {
  Tokenization t;
  t.id = "d1";
  t.words = {{"Rates", 0, 5, "NNS", O}, {"rose", 6, 10, "VBD", O}};
  t.tokens = {{"Rate", 0}, {"##s", 0}, {"rose", 1}};
  std::ostringstream out;
  write_tokenization(out, t);
  std::istringstream in(out.str());
  const auto back = read_tokenization(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == "d1");
  CHECK(back[0].words[1].char_start == 6);
  CHECK(back[0].words[0].pos == "NNS");
  CHECK(back[0].tokens[1].piece == "##s");
  CHECK(back[0].tokens[2].word_index == 1);

  std::istringstream bad(R"({"id":"x","words":[{"surface":"a","start":0,"end":1}],"tokens":[{"piece":"a","word_index":4}]})");
  CHECK_THROWS_AS(read_tokenization(bad), InputError);
}

TEST_CASE("PosVocab capacity") {
  std::vector<std::string> tags;
  for (int i = 0; i < 51; ++i) tags.push_back("T" + std::to_string(i));
  const auto v = PosVocab::build(tags);
  CHECK(v.size() == 51);
  CHECK(v.index("T0") == 0u);
  CHECK_FALSE(v.index("unseen").has_value());
  tags.push_back("T51");
  CHECK_THROWS_AS(PosVocab::build(tags), InputError);
}
