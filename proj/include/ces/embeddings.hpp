#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ces/nd/tensor.hpp"

namespace ces {

// One example of the "CEEM" embedding file: token pieces (for alignment
// validation) and their n×d float32 contextual vectors.
struct EmbeddingRecord {
  std::string id;
  std::vector<std::string> pieces;
  nd::Tensor<float> matrix;
};

inline constexpr char kEmbeddingMagic[4] = {'C', 'E', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

void write_embedding_file(std::ostream& out, std::size_t dim, std::span<const EmbeddingRecord> records);
void write_embedding_file(const std::filesystem::path& path, std::size_t dim,
                          std::span<const EmbeddingRecord> records);

struct EmbeddingFile {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

EmbeddingFile read_embedding_file(std::istream& in);
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

// Deterministic stand-in vectors: a 64-bit FNV-1a hash of the piece seeds a
// splitmix64 stream emitting `dim` values in [-0.5, 0.5).
nd::Tensor<float> hashed_embeddings(std::span<const std::string> pieces, std::size_t dim);

// Source of per-token contextual vectors for an example.
class EmbeddingProvider {
 public:
  static EmbeddingProvider hashed(std::size_t dim);
  static EmbeddingProvider from_file(EmbeddingFile file);
  static EmbeddingProvider from_file(const std::filesystem::path& path);

  std::size_t dim() const { return dim_; }
  bool is_hashed() const { return records_ == nullptr; }

  // Rows for the first `keep_rows` tokens of the example. File-backed
  // providers check that the stored pieces equal `pieces` (the full,
  // untruncated tokenization).
  nd::Tensor<float> lookup(const std::string& id, std::span<const std::string> pieces,
                           std::size_t keep_rows) const;

 private:
  std::size_t dim_ = 0;
  std::shared_ptr<const std::unordered_map<std::string, EmbeddingRecord>> records_;
};

}  // namespace ces
