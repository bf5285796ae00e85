#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pacte {

enum class Side { Liberal = 0, Conservative = 1 };

const char* to_string(Side side);
Side parse_side(const std::string& text);

using SourceMap = std::map<std::string, Side>;

SourceMap load_source_map(const std::filesystem::path& path);

struct Document {
  std::string id;
  std::string source;
  Side side = Side::Liberal;
  std::string date;
  std::string raw_text;
  std::vector<std::string> tokens;

  // A document whose preprocessing left no tokens.
  bool empty() const { return tokens.empty(); }
};

// One store of documents; the liberal, conservative and combined corpora are
// index views over it.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return documents_; }
  std::vector<Document>& documents() { return documents_; }
  std::size_t size() const { return documents_.size(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  std::vector<std::size_t> indices(Side side) const;
  std::vector<std::size_t> indices_of_source(const std::string& source) const;
  std::vector<std::size_t> all_indices() const;

  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct IngestStats {
  std::size_t lines = 0;
  std::size_t duplicate_texts = 0;
};

// One JSON object per line with keys id, source, date, text. Articles whose
// text exactly repeats an earlier article are skipped.
Corpus ingest_jsonl(const std::filesystem::path& path, const SourceMap& sources,
                    IngestStats* stats = nullptr);
Corpus ingest_jsonl(std::istream& in, const SourceMap& sources, IngestStats* stats = nullptr,
                    const std::string& origin = "<stream>");

const std::set<std::string>& english_stopwords();

struct PreprocessConfig {
  std::set<std::string> stopwords = english_stopwords();
  std::set<std::string> extra_stopwords = {"cnn", "fox", "huffington", "breitbart"};
  std::optional<std::unordered_map<std::string, std::string>> lemmas;
  bool lowercase = true;
};

// Maximal runs of Unicode letters/digits; an apostrophe (' or U+2019) is kept
// only between two such characters and is normalized to '.
std::vector<std::string> tokenize(const std::string& text, bool lowercase);

std::vector<std::string> preprocess_text(const std::string& text, const PreprocessConfig& config);
Corpus preprocess(const Corpus& corpus, const PreprocessConfig& config);

class BigramModel {
 public:
  BigramModel() = default;
  BigramModel(int min_count, double threshold,
              std::map<std::pair<std::string, std::string>, double> scored_pairs);

  int min_count() const { return min_count_; }
  double threshold() const { return threshold_; }
  const std::map<std::pair<std::string, std::string>, double>& scored_pairs() const {
    return scored_pairs_;
  }

  bool merges(const std::string& a, const std::string& b) const;

  // Left-to-right greedy, non-overlapping merge of scored pairs into "a_b".
  std::vector<std::string> apply(const std::vector<std::string>& tokens) const;
  Corpus apply(const Corpus& corpus) const;

 private:
  int min_count_ = 5;
  double threshold_ = 10.0;
  std::map<std::pair<std::string, std::string>, double> scored_pairs_;
};

double bigram_score(std::size_t pair_count, std::size_t count_a, std::size_t count_b,
                    std::size_t total_tokens, int min_count);

BigramModel fit_bigrams(const Corpus& corpus, int min_count, double threshold);
std::pair<BigramModel, Corpus> bigram_transform(const Corpus& corpus, int min_count,
                                                double threshold);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Tokens must be unique; indices follow the given order.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> document_frequency);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::optional<std::size_t> index(const std::string& token) const;
  std::size_t document_frequency(std::size_t index) const { return df_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // SHA-256 over the ordered token list.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps tokens whose document frequency lies in [min_df, max_df_fraction * |D|],
// indexed in lexicographic (byte) order.
Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df, double max_df_fraction);

}  // namespace pacte

namespace pacte {

// Preprocessed-token interchange: {"id", "side", "tokens"} per line, side 0 for
// Liberal and 1 for Conservative. The full form also carries source, date and
// text so a preprocessed corpus can be reloaded without the raw file.
std::string tokens_jsonl(const Corpus& corpus, bool full = false);
Corpus parse_tokens_jsonl(const std::string& text);

}  // namespace pacte
