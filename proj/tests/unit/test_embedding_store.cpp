#include <cstring>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "pacte/embedding_store.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"

using namespace pacte;

namespace {

ContextualEncoding make(const std::string& id, std::vector<std::string> tokens, std::size_t dim,
                        std::uint64_t seed) {
  Rng rng(seed);
  ContextualEncoding e;
  e.doc_id = id;
  e.dim = dim;
  e.tokens = std::move(tokens);
  // Values exactly representable as floats, so the round trip is lossless.
  for (std::size_t i = 0; i < e.tokens.size() * dim; ++i)
    e.token_vectors.push_back(static_cast<float>(rng.normal()));
  for (std::size_t i = 0; i < dim; ++i) e.pooled.push_back(static_cast<float>(rng.normal()));
  return e;
}

}  // namespace

TEST_CASE("record layout is bit-exact") {
  ContextualEncoding e;
  e.doc_id = "x";
  e.dim = 1;
  e.tokens = {"ab"};
  e.token_vectors = {1.0};
  e.pooled = {-2.0};
  const std::string bytes = encode_document_record(e);
  const std::string expected = std::string("PCTE") + std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) + std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01", 1) + std::string("\x02\x00", 2) + "ab" +
                               std::string("\x00\x00\x80\x3f", 4) + std::string("\x00\x00\x00\xc0", 4);
  CHECK(bytes == expected);
}

TEST_CASE("store round trip") {
  fixture::TempDir dir("store");
  std::vector<ContextualEncoding> encs = {make("a", {"tax", "cut"}, 4, 1), make("b", {"café"}, 4, 2),
                                          make("c", {"x", "y", "z"}, 4, 3)};
  write_embedding_store(dir.path(), "test-encoder", encs);
  const auto store = import_embedding_store(dir / "index.json");
  CHECK(store.size() == 3);
  CHECK(store.dim() == 4);
  CHECK(store.encoder_name() == "test-encoder");
  for (const auto& e : encs) {
    const auto back = store.load(e.doc_id);
    CHECK(back.tokens == e.tokens);
    CHECK(back.token_vectors == e.token_vectors);
    CHECK(back.pooled == e.pooled);
  }
  CHECK_THROWS_AS(store.load("nope"), DataError);
}

TEST_CASE("validation on open") {
  fixture::TempDir dir("store-bad");
  write_embedding_store(dir.path(), "enc", std::vector<ContextualEncoding>{make("a", {"t"}, 64, 1)});
  auto index = nlohmann::json::parse(io::read_file(dir / "index.json"));
  const std::string file = index["docs"][0]["file"];

  SUBCASE("dim mismatch") {
    index["dim"] = 768;
    io::write_file_atomic(dir / "index.json", index.dump());
    CHECK_THROWS_WITH_AS(import_embedding_store(dir / "index.json"),
                         doctest::Contains("does not match index dim 768"), DataError);
  }
  SUBCASE("token count mismatch") {
    index["docs"][0]["n_tokens"] = 5;
    io::write_file_atomic(dir / "index.json", index.dump());
    CHECK_THROWS_AS(import_embedding_store(dir / "index.json"), DataError);
  }
  SUBCASE("bad magic") {
    std::string bytes = io::read_file(dir / file);
    bytes[0] = 'X';
    io::write_file_atomic(dir / file, bytes);
    CHECK_THROWS_WITH_AS(import_embedding_store(dir / "index.json"), doctest::Contains("magic"), DataError);
  }
  SUBCASE("bad version") {
    std::string bytes = io::read_file(dir / file);
    bytes[4] = 2;
    io::write_file_atomic(dir / file, bytes);
    CHECK_THROWS_AS(import_embedding_store(dir / "index.json"), DataError);
  }
  SUBCASE("truncated record") {
    std::string bytes = io::read_file(dir / file);
    bytes.resize(bytes.size() - 3);
    io::write_file_atomic(dir / file, bytes);
    const auto store = import_embedding_store(dir / "index.json");
    CHECK_THROWS_AS(store.load("a"), DataError);
  }
}
