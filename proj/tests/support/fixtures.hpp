#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "pacte/corpus.hpp"
#include "pacte/io.hpp"
#include "pacte/random.hpp"

namespace fixture {

// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    pacte::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() /
            ("pacte-" + tag + "-" + std::to_string(rng.next() % 1000000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> numbered(const std::string& prefix, int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Side is given away by a single marker token at a random position; every
// other token is filler shared by both sides.
inline pacte::Corpus marker_corpus(std::size_t num_docs, std::uint64_t seed, std::size_t doc_len = 10,
                                   const std::string& id_prefix = "m") {
  pacte::Rng rng(seed);
  const auto filler = numbered("filler", 20);
  std::vector<pacte::Document> docs;
  for (std::size_t d = 0; d < num_docs; ++d) {
    pacte::Document doc;
    doc.id = id_prefix + std::to_string(d);
    doc.side = d % 2 == 0 ? pacte::Side::Liberal : pacte::Side::Conservative;
    doc.source = doc.side == pacte::Side::Liberal ? "left" : "right";
    for (std::size_t i = 0; i + 1 < doc_len; ++i) doc.tokens.push_back(filler[rng.below(filler.size())]);
    const auto pos = rng.below(doc.tokens.size() + 1);
    doc.tokens.insert(doc.tokens.begin() + static_cast<long>(pos),
                      doc.side == pacte::Side::Liberal ? "marker_left" : "marker_right");
    docs.push_back(std::move(doc));
  }
  return pacte::Corpus(std::move(docs));
}

// Two topics. Topic "alpha" keywords appear with side-specific context words,
// topic "beta" keywords with context words shared by both sides.
inline pacte::Corpus planted_polarization_corpus(std::uint64_t seed, std::size_t docs_per_cell = 20,
                                                 std::size_t doc_len = 16) {
  pacte::Rng rng(seed);
  const auto alpha_kw = numbered("alphakw", 5);
  const auto beta_kw = numbered("betakw", 5);
  const auto left_ctx = numbered("leftctx", 6);
  const auto right_ctx = numbered("rightctx", 6);
  const auto shared_ctx = numbered("sharedctx", 6);
  std::vector<pacte::Document> docs;
  int id = 0;
  for (int topic = 0; topic < 2; ++topic)
    for (int side = 0; side < 2; ++side)
      for (std::size_t k = 0; k < docs_per_cell; ++k) {
        pacte::Document doc;
        doc.id = "p" + std::to_string(id++);
        doc.side = side == 0 ? pacte::Side::Liberal : pacte::Side::Conservative;
        doc.source = side == 0 ? "left" : "right";
        const auto& kw = topic == 0 ? alpha_kw : beta_kw;
        const auto& ctx = topic == 0 ? (side == 0 ? left_ctx : right_ctx) : shared_ctx;
        for (std::size_t i = 0; i < doc_len; ++i)
          doc.tokens.push_back(i % 2 == 0 ? kw[rng.below(kw.size())] : ctx[rng.below(ctx.size())]);
        docs.push_back(std::move(doc));
      }
  return pacte::Corpus(std::move(docs));
}

// Raw news-like articles: two themes, four articles per side, side-specific
// wording on the first theme.
inline std::string toy_corpus_jsonl() {
  const char* lines[] = {
      R"({"id":"l1","source":"leftnews","date":"2020-03-01","text":"The president briefing on the virus outbreak drew criticism from doctors who called the briefing misleading and dangerous for hospitals."})",
      R"({"id":"l2","source":"leftnews","date":"2020-03-02","text":"Doctors criticize the president briefing, saying the virus response failed hospitals and nurses facing the outbreak."})",
      R"({"id":"l3","source":"leftnews","date":"2020-03-03","text":"Stock market trading fell as investors weighed interest rates, and the market index closed lower after trading."})",
      R"({"id":"r1","source":"rightnews","date":"2020-03-01","text":"The president briefing on the virus outbreak praised the strong leadership and decisive travel ban protecting families."})",
      R"({"id":"r2","source":"rightnews","date":"2020-03-02","text":"Leadership praised as the president briefing outlined the travel ban, protecting families from the virus outbreak."})",
      R"({"id":"r3","source":"rightnews","date":"2020-03-03","text":"Stock market trading rose as investors weighed interest rates, and the market index closed higher after trading."})",
      R"({"id":"l4","source":"leftnews","date":"2020-03-04","text":"Investors watched interest rates while stock market trading steadied and the market index held after trading."})",
      R"({"id":"r4","source":"rightnews","date":"2020-03-04","text":"Investors watched interest rates while stock market trading steadied and the index of the market held after trading."})",
  };
  std::string out;
  for (const char* l : lines) out += std::string(l) + "\n";
  return out;
}

// Writes the toy corpus, a small annotation file and a fast config into dir and
// returns the config path. The workdir is dir/work.
inline std::filesystem::path write_toy_project(const std::filesystem::path& dir) {
  pacte::io::write_file_atomic(dir / "corpus.jsonl", toy_corpus_jsonl());
  std::string ann = R"({"topics": [)";
  for (int t = 0; t < 3; ++t) {
    if (t) ann += ",";
    const char* l = t == 0 ? "[1,1,1]" : "[0,0,1]";
    const char* r = t == 1 ? "[1,1,1]" : "[0,0,0]";
    ann += R"({"id": )" + std::to_string(t) + R"(, "docs": [)" +
           R"({"doc_id": "l1", "source": "leftnews", "labels": )" + l + "}," +
           R"({"doc_id": "r1", "source": "rightnews", "labels": )" + r + "}]}";
  }
  ann += "]}";
  pacte::io::write_file_atomic(dir / "annotations.json", ann);
  pacte::io::write_file_atomic(dir / "config.json", R"({
  "corpus": "corpus.jsonl",
  "annotations": "annotations.json",
  "workdir": "work",
  "sources": {"leftnews": "Liberal", "rightnews": "Conservative"},
  "bigram": {"min_count": 100},
  "lda": {"k": 3, "iterations": 60, "seed": 3},
  "m": 4,
  "n": 3,
  "encoder": {"d_model": 8, "n_heads": 2, "n_layers": 1, "ffn_dim": 16, "max_len": 32, "seed": 5},
  "train": {"epochs": 2, "batch_size": 4, "learning_rate": 0.001},
  "variants": ["PaCTE", "NoFinetune", "DocEmbedding", "ShuffledLabels"],
  "eval": {"k": 1}
}
)");
  return dir / "config.json";
}

}  // namespace fixture
