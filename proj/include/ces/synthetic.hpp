#pragma once

#include <cstdint>
#include <vector>

#include "ces/corpus.hpp"
#include "ces/depgraph.hpp"

namespace ces {

struct SyntheticOptions {
  std::size_t count = 50;
  std::uint64_t seed = 7;
  double filler_probability = 0.3;  // chance of a leading unrelated sentence
  bool subword_splits = true;       // cut long words into "##" pieces
};

// A generated corpus with its three aligned views.
struct SyntheticCorpus {
  std::vector<RawExample> examples;
  std::vector<ParsedDocument> parses;
  std::vector<Tokenization> tokenizations;
};

// Documents built from cue-word templates ("E because C.", "C, so E.",
// "Due to C, E.", "E as a result of C.") with disjoint cause and effect
// vocabularies and a consistent dependency tree per sentence.
SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options = {});

// Deterministic subword split: words of 8+ bytes become a 4-byte stem and
// "##"-prefixed continuation pieces of up to 6 bytes.
std::vector<std::string> split_pieces(const std::string& word);

}  // namespace ces
