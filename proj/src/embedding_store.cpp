#include "pacte/embedding_store.hpp"

#include <cstdio>
#include <limits>

#include "json.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"

namespace pacte {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string encode_document_record(const ContextualEncoding& enc) {
  if (enc.token_vectors.size() != enc.tokens.size() * enc.dim)
    throw DataError("encoding of '" + enc.doc_id + "' has inconsistent token matrix size");
  if (enc.pooled.size() != enc.dim)
    throw DataError("encoding of '" + enc.doc_id + "' has pooled vector of wrong size");
  std::string out = "PCTE";
  io::put_u32(out, kInterchangeVersion);
  io::put_u32(out, static_cast<std::uint32_t>(enc.tokens.size()));
  io::put_u32(out, static_cast<std::uint32_t>(enc.dim));
  io::put_u8(out, 1);
  for (const auto& t : enc.tokens) {
    if (t.size() > std::numeric_limits<std::uint16_t>::max())
      throw DataError("token longer than 65535 bytes in '" + enc.doc_id + "'");
    io::put_u16(out, static_cast<std::uint16_t>(t.size()));
    out += t;
  }
  for (double v : enc.token_vectors) io::put_f32(out, static_cast<float>(v));
  for (double v : enc.pooled) io::put_f32(out, static_cast<float>(v));
  return out;
}

ContextualEncoding decode_document_record(std::string_view bytes, const std::string& doc_id) {
  io::ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "PCTE")
    throw DataError("record for '" + doc_id + "': bad magic (expected PCTE)");
  const auto version = r.u32();
  if (version != kInterchangeVersion)
    throw DataError("record for '" + doc_id + "': unsupported version " + std::to_string(version));
  ContextualEncoding enc;
  enc.doc_id = doc_id;
  const auto n_tokens = r.u32();
  enc.dim = r.u32();
  if (r.u8() != 1) throw DataError("record for '" + doc_id + "': pooled vector missing");
  enc.tokens.reserve(n_tokens);
  for (std::uint32_t i = 0; i < n_tokens; ++i) {
    const auto len = r.u16();
    enc.tokens.emplace_back(r.bytes(len));
  }
  enc.token_vectors.resize(static_cast<std::size_t>(n_tokens) * enc.dim);
  for (auto& v : enc.token_vectors) v = r.f32();
  enc.pooled.resize(enc.dim);
  for (auto& v : enc.pooled) v = r.f32();
  if (r.remaining() != 0)
    throw DataError("record for '" + doc_id + "': " + std::to_string(r.remaining()) +
                    " trailing bytes");
  return enc;
}

EmbeddingStore EmbeddingStore::open(const fs::path& index_path) {
  json index;
  try {
    index = json::parse(io::read_file(index_path));
  } catch (const json::exception& e) {
    throw DataError("embedding index " + index_path.string() + ": " + e.what());
  }
  EmbeddingStore store;
  store.root_ = index_path.parent_path();
  try {
    if (index.at("version").get<int>() != static_cast<int>(kInterchangeVersion))
      throw DataError("embedding index version mismatch");
    store.dim_ = index.at("dim").get<std::size_t>();
    store.encoder_ = index.at("encoder").get<std::string>();
    for (const auto& d : index.at("docs")) {
      StoreEntry e{d.at("id").get<std::string>(), d.at("file").get<std::string>(),
                   d.at("n_tokens").get<std::size_t>()};
      if (!store.by_id_.emplace(e.id, store.entries_.size()).second)
        throw DataError("embedding index lists '" + e.id + "' twice");
      store.entries_.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("embedding index " + index_path.string() + ": " + e.what());
  }
  // Header check of every record: dim and token count must agree with the index.
  for (const auto& e : store.entries_) {
    const std::string bytes = io::read_file(store.root_ / e.file);
    io::ByteReader r(bytes);
    if (r.remaining() < 17 || r.bytes(4) != "PCTE")
      throw DataError("record " + e.file + ": bad magic (expected PCTE)");
    if (r.u32() != kInterchangeVersion) throw DataError("record " + e.file + ": version mismatch");
    const auto n_tokens = r.u32();
    const auto dim = r.u32();
    if (dim != store.dim_)
      throw DataError("record " + e.file + ": dim " + std::to_string(dim) +
                      " does not match index dim " + std::to_string(store.dim_));
    if (n_tokens != e.n_tokens)
      throw DataError("record " + e.file + ": " + std::to_string(n_tokens) +
                      " tokens, index declares " + std::to_string(e.n_tokens));
  }
  return store;
}

ContextualEncoding EmbeddingStore::load(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  if (it == by_id_.end()) throw DataError("embedding store has no document '" + doc_id + "'");
  const auto& e = entries_[it->second];
  auto enc = decode_document_record(io::read_file(root_ / e.file), doc_id);
  if (enc.dim != dim_) throw DataError("record " + e.file + ": dim mismatch");
  if (enc.num_tokens() != e.n_tokens) throw DataError("record " + e.file + ": token count mismatch");
  return enc;
}

EmbeddingStore import_embedding_store(const fs::path& index_path) {
  return EmbeddingStore::open(index_path);
}

void write_embedding_store(const fs::path& dir, const std::string& encoder_name,
                           std::span<const ContextualEncoding> encodings) {
  fs::create_directories(dir);
  json index;
  index["version"] = kInterchangeVersion;
  index["dim"] = encodings.empty() ? 0 : encodings.front().dim;
  index["encoder"] = encoder_name;
  index["docs"] = json::array();
  for (std::size_t i = 0; i < encodings.size(); ++i) {
    const auto& enc = encodings[i];
    if (enc.dim != encodings.front().dim) throw DataError("mixed dims in one embedding store");
    char name[32];
    std::snprintf(name, sizeof name, "%08zu.pcte", i);
    io::write_file_atomic(dir / name, encode_document_record(enc));
    index["docs"].push_back({{"id", enc.doc_id}, {"file", name}, {"n_tokens", enc.num_tokens()}});
  }
  io::write_file_atomic(dir / "index.json", index.dump(2) + "\n");
}

}  // namespace pacte
