#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ces {

// Five-way BIO tag set over the span types Cause (C) and Effect (E). The
// numeric order is part of the Viterbi tie-breaking contract.
enum class LabelTag : std::uint8_t { kBeginCause = 0, kInsideCause, kBeginEffect, kInsideEffect, kOutside };

inline constexpr std::size_t kNumTags = 5;

inline constexpr std::array<LabelTag, kNumTags> kAllTags = {
    LabelTag::kBeginCause, LabelTag::kInsideCause, LabelTag::kBeginEffect,
    LabelTag::kInsideEffect, LabelTag::kOutside};

// Span type obtained by dropping the B-/I- prefix.
enum class SpanType : std::uint8_t { kCause = 0, kEffect, kOther };

inline constexpr std::size_t kNumSpanTypes = 3;

constexpr std::size_t tag_index(LabelTag t) { return static_cast<std::size_t>(t); }
constexpr LabelTag tag_from_index(std::size_t i) { return static_cast<LabelTag>(i); }

constexpr SpanType collapse(LabelTag t) {
  switch (t) {
    case LabelTag::kBeginCause:
    case LabelTag::kInsideCause:
      return SpanType::kCause;
    case LabelTag::kBeginEffect:
    case LabelTag::kInsideEffect:
      return SpanType::kEffect;
    case LabelTag::kOutside:
      break;
  }
  return SpanType::kOther;
}

constexpr bool is_begin(LabelTag t) {
  return t == LabelTag::kBeginCause || t == LabelTag::kBeginEffect;
}

constexpr bool is_inside(LabelTag t) {
  return t == LabelTag::kInsideCause || t == LabelTag::kInsideEffect;
}

constexpr LabelTag begin_tag(SpanType s) {
  return s == SpanType::kCause ? LabelTag::kBeginCause
         : s == SpanType::kEffect ? LabelTag::kBeginEffect
                                  : LabelTag::kOutside;
}

constexpr LabelTag inside_tag(SpanType s) {
  return s == SpanType::kCause ? LabelTag::kInsideCause
         : s == SpanType::kEffect ? LabelTag::kInsideEffect
                                  : LabelTag::kOutside;
}

std::string_view to_string(LabelTag t);
std::string_view to_string(SpanType s);
std::optional<LabelTag> parse_tag(std::string_view s);

}  // namespace ces
