#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pacte {

// Final-layer states of one encoded document: one row per kept token plus
// the pooled document vector.
struct ContextualEncoding {
  std::string doc_id;
  std::size_t dim = 0;
  std::vector<std::string> tokens;
  std::vector<double> token_vectors;  // tokens.size() x dim, row-major
  std::vector<double> pooled;

  std::size_t num_tokens() const { return tokens.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(token_vectors).subspan(i * dim, dim);
  }
};

// Per-document binary record of the embedding interchange format:
//   "PCTE", u32 version (1), u32 n_tokens, u32 dim, u8 has_pooled (1),
//   n_tokens x (u16 byte length + UTF-8 bytes),
//   n_tokens x dim f32 row-major, dim f32 pooled; all little-endian.
inline constexpr std::uint32_t kInterchangeVersion = 1;

std::string encode_document_record(const ContextualEncoding& encoding);
ContextualEncoding decode_document_record(std::string_view bytes, const std::string& doc_id);

struct StoreEntry {
  std::string id;
  std::string file;
  std::size_t n_tokens = 0;
};

// Directory with index.json plus one record file per document. Records are
// read on demand; the index and every record header are validated on open.
class EmbeddingStore {
 public:
  static EmbeddingStore open(const std::filesystem::path& index_path);

  std::size_t dim() const { return dim_; }
  const std::string& encoder_name() const { return encoder_; }
  const std::vector<StoreEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& doc_id) const { return by_id_.count(doc_id) > 0; }

  ContextualEncoding load(const std::string& doc_id) const;

 private:
  std::filesystem::path root_;
  std::size_t dim_ = 0;
  std::string encoder_;
  std::vector<StoreEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
};

EmbeddingStore import_embedding_store(const std::filesystem::path& index_path);

// Writes records and index.json into dir. Record file names are derived from
// document order, so ids never need escaping.
void write_embedding_store(const std::filesystem::path& dir, const std::string& encoder_name,
                           std::span<const ContextualEncoding> encodings);

}  // namespace pacte
