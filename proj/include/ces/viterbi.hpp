#pragma once

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "ces/labels.hpp"

namespace ces {

using TagArray = std::array<double, kNumTags>;
using TagMatrix = std::array<TagArray, kNumTags>;

// BIO legality: no I- tag may follow O or the other span type, and no
// sequence may start with an I- tag.
constexpr bool transition_allowed(LabelTag from, LabelTag to) {
  if (!is_inside(to)) return true;
  return collapse(from) == collapse(to);
}

constexpr bool start_allowed(LabelTag t) { return !is_inside(t); }

struct TransitionCounts {
  TagArray start{};
  TagMatrix bigram{};
};

// Start and transition log-probabilities. Structurally forbidden cells are
// -infinity.
class TransitionModel {
 public:
  // Add-one smoothing over allowed cells, then normalization per row.
  static TransitionModel from_counts(const TransitionCounts& counts);

  const TagArray& log_start() const { return log_start_; }
  const TagMatrix& log_trans() const { return log_trans_; }
  const TransitionCounts& counts() const { return counts_; }

  // Inspection dump: probabilities (0 for forbidden cells) and raw counts.
  nlohmann::json to_json() const;
  static TransitionModel from_json(const nlohmann::json& j);

 private:
  TransitionCounts counts_;
  TagArray log_start_{};
  TagMatrix log_trans_{};
};

TransitionCounts count_transitions(std::span<const std::vector<LabelTag>> sequences);
TransitionModel estimate_transitions(std::span<const std::vector<LabelTag>> sequences);

// Per-position log scores over the five tags.
using Emissions = std::vector<TagArray>;

double path_score(const Emissions& emissions, const TransitionModel& tm, std::span<const LabelTag> path);

// Highest-scoring tag sequence; among equal scores, the lexicographically
// smallest tag-index sequence.
std::vector<LabelTag> viterbi_decode(const Emissions& emissions, const TransitionModel& tm);

// Exhaustive 5^n search with the same tie rule. n ≤ 10.
std::vector<LabelTag> brute_force_decode(const Emissions& emissions, const TransitionModel& tm);

}  // namespace ces
