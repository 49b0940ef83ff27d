#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ces/labels.hpp"

namespace ces {

// Word-level dependency arc; indices are 0-based into the document's word
// sequence (shared across sentences).
struct DepArc {
  std::size_t head_word = 0;
  std::size_t tail_word = 0;
  std::string relation;
};

struct ParsedWord {
  std::string form;
  std::string upos;
  std::string xpos;
};

struct ParsedDocument {
  std::string id;
  std::vector<ParsedWord> words;
  std::vector<DepArc> arcs;
  // Index of the first word of each sentence.
  std::vector<std::size_t> sentence_starts;

  std::size_t sentence_count() const { return sentence_starts.size(); }
  std::vector<std::string> forms() const;
};

// Directed graph over token indices, edges oriented head piece → tail piece.
// Edges are kept sorted and unique.
struct TokenGraph {
  std::size_t n_nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  // in_neighbors()[v] lists u for every edge (u → v).
  std::vector<std::vector<std::size_t>> in_neighbors() const;
  std::vector<std::vector<std::size_t>> out_neighbors() const;
  std::size_t weak_component_count() const;

  // Drops nodes >= n and every edge touching them.
  TokenGraph restricted(std::size_t n) const;
  bool operator==(const TokenGraph&) const = default;
};

// Grouping of CoNLL-U sentences into documents.
enum class DocumentSplit {
  kDocIdComment,  // "# newdoc id = X" (or "# doc_id = X") starts a document
  kWholeFile,     // every sentence belongs to one document
};

std::vector<ParsedDocument> parse_conllu(std::istream& in,
                                         DocumentSplit split = DocumentSplit::kDocIdComment);
std::vector<ParsedDocument> read_conllu(const std::filesystem::path& path,
                                        DocumentSplit split = DocumentSplit::kDocIdComment);
void write_conllu(std::ostream& out, const ParsedDocument& doc);

// token_to_word maps every (untruncated) token to its word.
TokenGraph build_token_graph(std::span<const DepArc> arcs, std::span<const std::size_t> token_to_word);

// Fraction of edges whose endpoints share a label.
double homophily_score(const TokenGraph& graph, std::span<const SpanType> labels);

std::string graph_to_json(const TokenGraph& graph);

}  // namespace ces
