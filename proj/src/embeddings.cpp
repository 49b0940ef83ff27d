#include "ces/embeddings.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "ces/error.hpp"
#include "ces/nd/random.hpp"

namespace ces {

void write_embedding_file(std::ostream& out, std::size_t dim, std::span<const EmbeddingRecord> records) {
  out.write(kEmbeddingMagic, 4);
  binio::write_u32(out, kEmbeddingFormatVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(dim));
  binio::write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.matrix.rows() != r.pieces.size() || r.matrix.cols() != dim) {
      throw std::invalid_argument("embedding record " + r.id + ": matrix " + nd::shape_string(r.matrix.shape()) +
                                  " does not match " + std::to_string(r.pieces.size()) + " pieces × " +
                                  std::to_string(dim));
    }
    binio::write_bytes(out, r.id);
    binio::write_u32(out, static_cast<std::uint32_t>(r.pieces.size()));
    for (const auto& p : r.pieces) binio::write_bytes(out, p);
    binio::write_f32(out, r.matrix.data(), r.matrix.size());
  }
}

void write_embedding_file(const std::filesystem::path& path, std::size_t dim,
                          std::span<const EmbeddingRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write embedding file " + path.string());
  write_embedding_file(out, dim, records);
}

EmbeddingFile read_embedding_file(std::istream& in) {
  binio::Reader r(in, "embedding file");
  char magic[4];
  r.read_raw(magic, 4);
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) throw InputError("embedding file: bad magic (expected CEEM)");
  const auto version = r.u32();
  if (version != kEmbeddingFormatVersion) {
    throw InputError("embedding file: unsupported format version " + std::to_string(version));
  }
  EmbeddingFile f;
  f.dim = r.u32();
  if (f.dim == 0) throw InputError("embedding file: zero dimension");
  const auto count = r.u32();
  f.records.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    EmbeddingRecord rec;
    rec.id = r.bytes();
    const auto n = r.u32();
    rec.pieces.reserve(n);
    for (std::uint32_t t = 0; t < n; ++t) rec.pieces.push_back(r.bytes());
    rec.matrix = nd::Tensor<float>({n, f.dim});
    try {
      r.f32(rec.matrix.data(), rec.matrix.size());
    } catch (const InputError&) {
      throw InputError("embedding file: truncated in example " + rec.id);
    }
    f.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw InputError("embedding file: trailing bytes after last example");
  return f;
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file " + path.string());
  return read_embedding_file(in);
}

nd::Tensor<float> hashed_embeddings(std::span<const std::string> pieces, std::size_t dim) {
  nd::Tensor<float> out({pieces.size(), dim});
  for (std::size_t t = 0; t < pieces.size(); ++t) {
    std::uint64_t state = nd::fnv1a64(pieces[t]);
    for (std::size_t j = 0; j < dim; ++j) {
      const double u = static_cast<double>(nd::splitmix64(state) >> 11) * 0x1.0p-53;
      out(t, j) = static_cast<float>(u - 0.5);
    }
  }
  return out;
}

EmbeddingProvider EmbeddingProvider::hashed(std::size_t dim) {
  EmbeddingProvider p;
  p.dim_ = dim;
  return p;
}

EmbeddingProvider EmbeddingProvider::from_file(EmbeddingFile file) {
  auto map = std::make_shared<std::unordered_map<std::string, EmbeddingRecord>>();
  for (auto& rec : file.records) {
    const auto id = rec.id;
    if (!map->emplace(id, std::move(rec)).second) {
      throw InputError("embedding file: duplicate example id " + id);
    }
  }
  EmbeddingProvider p;
  p.dim_ = file.dim;
  p.records_ = std::move(map);
  return p;
}

EmbeddingProvider EmbeddingProvider::from_file(const std::filesystem::path& path) {
  return from_file(read_embedding_file(path));
}

nd::Tensor<float> EmbeddingProvider::lookup(const std::string& id, std::span<const std::string> pieces,
                                            std::size_t keep_rows) const {
  keep_rows = std::min(keep_rows, pieces.size());
  if (is_hashed()) return hashed_embeddings(pieces.first(keep_rows), dim_);

  const auto it = records_->find(id);
  if (it == records_->end()) throw InputError("embedding provider lacks example id " + id);
  const auto& rec = it->second;
  if (rec.pieces.size() != pieces.size()) {
    throw InputError("example " + id + ": embedding file has " + std::to_string(rec.pieces.size()) +
                     " tokens, tokenization has " + std::to_string(pieces.size()));
  }
  for (std::size_t t = 0; t < pieces.size(); ++t) {
    if (rec.pieces[t] != pieces[t]) {
      throw InputError("example " + id + ": token " + std::to_string(t) + " is '" + rec.pieces[t] +
                       "' in the embedding file but '" + pieces[t] + "' in the tokenization");
    }
  }
  nd::Tensor<float> out({keep_rows, dim_});
  std::copy_n(rec.matrix.data(), keep_rows * dim_, out.data());
  return out;
}

}  // namespace ces
