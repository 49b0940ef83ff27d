#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ces/labels.hpp"

namespace ces {

inline constexpr std::size_t kDefaultMaxSeqLen = 350;

struct RawExample {
  std::string id;
  std::string text;
  std::string cause;   // empty when absent
  std::string effect;  // empty when absent
};

// Half-open byte range [begin, end) into the UTF-8 document text.
struct CharRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool intersects(const CharRange& o) const { return begin < o.end && o.begin < end; }
  bool operator==(const CharRange&) const = default;
};

struct SpanRanges {
  std::optional<CharRange> cause;
  std::optional<CharRange> effect;
};

struct Word {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string pos;  // empty when unknown
  LabelTag label = LabelTag::kOutside;
};

// One subword piece and the word it was cut from.
struct Token {
  std::string piece;
  std::size_t word_index = 0;
};

// A tokenizer's view of one example: words with offsets and POS, and the
// subword pieces. This is the record type of the tokenization JSON-lines file.
struct Tokenization {
  std::string id;
  std::vector<Word> words;
  std::vector<Token> tokens;
};

struct LabeledExample {
  std::string id;
  std::string text;
  std::vector<Word> words;
  // Retained (possibly truncated) tokens.
  std::vector<std::string> tokens;
  std::vector<std::size_t> token_to_word;
  std::vector<LabelTag> token_labels;
  std::size_t untruncated_token_count = 0;

  // Index of each word's first retained token, or nullopt when the word was
  // truncated away.
  std::vector<std::optional<std::size_t>> first_token_of_word() const;
  std::vector<LabelTag> word_labels() const;
};

struct DecodedSpans {
  std::string cause;
  std::string effect;
  bool operator==(const DecodedSpans&) const = default;
};

// Dense POS tag index. Capacity defaults to the feature width reserved for
// the one-hot POS block.
class PosVocab {
 public:
  static constexpr std::size_t kDefaultCapacity = 51;

  PosVocab() = default;

  // Tags are indexed in order of first appearance; empty tags are skipped.
  static PosVocab build(std::span<const std::string> tags, std::size_t capacity = kDefaultCapacity);

  std::optional<std::size_t> index(std::string_view tag) const;
  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Dataset CSV with header columns Index, Text, Cause, Effect (the last two
// optional). Fields are whitespace-trimmed.
std::vector<RawExample> parse_dataset(std::istream& in, char delimiter = ';');
std::vector<RawExample> read_dataset(const std::filesystem::path& path, char delimiter = ';');
void write_dataset(std::ostream& out, std::span<const RawExample> examples, char delimiter = ';');

SpanRanges locate_spans(const RawExample& ex);

// Whitespace segmentation with leading/trailing punctuation split into
// single-character words.
std::vector<Word> segment_words(std::string_view text);

// Aligns externally segmented word forms (e.g. from a parse) to text offsets.
std::vector<Word> align_words(std::string_view text, std::span<const std::string> forms);

std::vector<Word> encode_bio(std::vector<Word> words, const SpanRanges& spans);

// One token per word, piece = surface.
std::vector<Token> whitespace_tokens(std::span<const Word> words);

LabeledExample align_to_tokens(const RawExample& ex, std::vector<Word> words,
                               std::span<const Token> tokens,
                               std::size_t max_seq_len = kDefaultMaxSeqLen);

// Token tags to word tags via each word's first token; truncated words → O.
std::vector<LabelTag> lift_to_words(const LabeledExample& ex, std::span<const LabelTag> token_tags);

DecodedSpans spans_from_word_tags(const LabeledExample& ex, std::span<const LabelTag> word_tags);
DecodedSpans decode_spans(const LabeledExample& ex, std::span<const LabelTag> predicted);

std::vector<Tokenization> read_tokenization(std::istream& in);
std::vector<Tokenization> read_tokenization(const std::filesystem::path& path);
void write_tokenization(std::ostream& out, const Tokenization& tok);

}  // namespace ces
