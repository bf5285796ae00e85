#include "pacte/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "json.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"

namespace pacte {

using json = nlohmann::json;

const char* to_string(Side side) {
  return side == Side::Liberal ? "Liberal" : "Conservative";
}

Side parse_side(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "liberal" || t == "left" || t == "l" || t == "0") return Side::Liberal;
  if (t == "conservative" || t == "right" || t == "r" || t == "1") return Side::Conservative;
  throw ConfigError("unknown side '" + text + "' (expected Liberal or Conservative)");
}

SourceMap load_source_map(const std::filesystem::path& path) {
  SourceMap out;
  for (const auto& [source, side] : io::read_map_file(path)) out[source] = parse_side(side);
  return out;
}

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(documents_[i].id, i);
    if (!inserted) throw DataError("duplicate document id '" + documents_[i].id + "'");
  }
}

std::vector<std::size_t> Corpus::indices(Side side) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < documents_.size(); ++i)
    if (documents_[i].side == side) out.push_back(i);
  return out;
}

std::vector<std::size_t> Corpus::indices_of_source(const std::string& source) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < documents_.size(); ++i)
    if (documents_[i].source == source) out.push_back(i);
  return out;
}

std::vector<std::size_t> Corpus::all_indices() const {
  std::vector<std::size_t> out(documents_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

std::optional<std::size_t> Corpus::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

Corpus ingest_jsonl(const std::filesystem::path& path, const SourceMap& sources,
                    IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return ingest_jsonl(in, sources, stats, path.string());
}

Corpus ingest_jsonl(std::istream& in, const SourceMap& sources, IngestStats* stats,
                    const std::string& origin) {
  static const std::regex kDate(R"(\d{4}-\d{2}-\d{2}.*)");
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen_ids;
  std::unordered_map<std::string, std::string> seen_texts;
  IngestStats local;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++local.lines;
    const std::string where = origin + ":" + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    for (const char* key : {"id", "source", "date", "text"}) {
      if (!obj.contains(key) || !obj[key].is_string())
        throw DataError(where + ": missing string field '" + key + "'");
    }
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.source = obj["source"].get<std::string>();
    doc.date = obj["date"].get<std::string>();
    doc.raw_text = obj["text"].get<std::string>();
    if (!std::regex_match(doc.date, kDate))
      throw DataError(where + ": date '" + doc.date + "' is not ISO-8601");
    auto side = sources.find(doc.source);
    if (side == sources.end()) throw DataError(where + ": unknown source '" + doc.source + "'");
    doc.side = side->second;
    if (auto [it, inserted] = seen_ids.emplace(doc.id, lineno); !inserted)
      throw DataError(where + ": duplicate id '" + doc.id + "' (first seen on line " +
                      std::to_string(it->second) + ")");
    if (!seen_texts.emplace(doc.raw_text, doc.id).second) {
      ++local.duplicate_texts;
      continue;
    }
    docs.push_back(std::move(doc));
  }
  if (stats) *stats = local;
  return Corpus(std::move(docs));
}

const std::set<std::string>& english_stopwords() {
  // NLTK English list.
  static const std::set<std::string> kWords = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
      "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his",
      "himself", "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
      "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be", "been",
      "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an", "the",
      "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by", "for",
      "with", "about", "against", "between", "into", "through", "during", "before", "after",
      "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
      "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
      "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can",
      "will", "just", "don", "don't", "should", "should've", "now", "d", "ll", "m", "o", "re",
      "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn", "didn't", "doesn",
      "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn", "isn't", "ma",
      "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
      "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
      "wouldn't"};
  return kWords;
}

namespace {

bool is_word_char(UChar32 c) { return u_isalpha(c) || u_isdigit(c); }
bool is_apostrophe(UChar32 c) { return c == 0x27 || c == 0x2019; }

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
  std::vector<UChar32> cps;
  cps.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto n = static_cast<int32_t>(text.size());
  for (int32_t i = 0; i < n;) {
    UChar32 c;
    U8_NEXT(s, i, n, c);
    cps.push_back(c < 0 ? 0xFFFD : c);
  }
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const UChar32 c = cps[i];
    if (is_word_char(c)) {
      append_utf8(current, lowercase ? u_tolower(c) : c);
    } else if (is_apostrophe(c) && !current.empty() && i + 1 < cps.size() &&
               is_word_char(cps[i + 1])) {
      current.push_back('\'');
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> preprocess_text(const std::string& text, const PreprocessConfig& config) {
  std::vector<std::string> out;
  auto is_stop = [&](const std::string& t) {
    return config.stopwords.count(t) > 0 || config.extra_stopwords.count(t) > 0;
  };
  for (auto& token : tokenize(text, config.lowercase)) {
    if (is_stop(token)) continue;
    if (config.lemmas) {
      auto it = config.lemmas->find(token);
      if (it != config.lemmas->end()) token = it->second;
      if (is_stop(token)) continue;
    }
    out.push_back(std::move(token));
  }
  return out;
}

Corpus preprocess(const Corpus& corpus, const PreprocessConfig& config) {
  std::vector<Document> docs = corpus.documents();
  for (auto& doc : docs) doc.tokens = preprocess_text(doc.raw_text, config);
  return Corpus(std::move(docs));
}

BigramModel::BigramModel(int min_count, double threshold,
                         std::map<std::pair<std::string, std::string>, double> scored_pairs)
    : min_count_(min_count), threshold_(threshold), scored_pairs_(std::move(scored_pairs)) {}

bool BigramModel::merges(const std::string& a, const std::string& b) const {
  return scored_pairs_.count({a, b}) > 0;
}

std::vector<std::string> BigramModel::apply(const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (i + 1 < tokens.size() && merges(tokens[i], tokens[i + 1])) {
      out.push_back(tokens[i] + "_" + tokens[i + 1]);
      i += 2;
    } else {
      out.push_back(tokens[i]);
      ++i;
    }
  }
  return out;
}

Corpus BigramModel::apply(const Corpus& corpus) const {
  std::vector<Document> docs = corpus.documents();
  for (auto& doc : docs) doc.tokens = apply(doc.tokens);
  return Corpus(std::move(docs));
}

double bigram_score(std::size_t pair_count, std::size_t count_a, std::size_t count_b,
                    std::size_t total_tokens, int min_count) {
  return (static_cast<double>(pair_count) - min_count) * static_cast<double>(total_tokens) /
         (static_cast<double>(count_a) * static_cast<double>(count_b));
}

BigramModel fit_bigrams(const Corpus& corpus, int min_count, double threshold) {
  if (min_count < 1) throw ConfigError("bigram min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> unigrams;
  std::map<std::pair<std::string, std::string>, std::size_t> pairs;
  std::size_t total = 0;
  for (const auto& doc : corpus.documents()) {
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      ++unigrams[doc.tokens[i]];
      ++total;
      if (i + 1 < doc.tokens.size()) ++pairs[{doc.tokens[i], doc.tokens[i + 1]}];
    }
  }
  std::map<std::pair<std::string, std::string>, double> scored;
  for (const auto& [pair, count] : pairs) {
    if (count < static_cast<std::size_t>(min_count)) continue;
    // Phrases never contain the merge separator, so merged output stays stable.
    if (pair.first.find('_') != std::string::npos || pair.second.find('_') != std::string::npos)
      continue;
    const double score =
        bigram_score(count, unigrams[pair.first], unigrams[pair.second], total, min_count);
    if (score >= threshold) scored.emplace(pair, score);
  }
  return BigramModel(min_count, threshold, std::move(scored));
}

std::pair<BigramModel, Corpus> bigram_transform(const Corpus& corpus, int min_count,
                                                double threshold) {
  BigramModel model = fit_bigrams(corpus, min_count, threshold);
  Corpus out = model.apply(corpus);
  return {std::move(model), std::move(out)};
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> df)
    : tokens_(std::move(tokens)), df_(std::move(df)) {
  if (df_.size() != tokens_.size()) throw DataError("vocabulary frequency table size mismatch");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

std::optional<std::size_t> Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  io::Sha256 h;
  for (const auto& t : tokens_) {
    h.update(t);
    h.update(std::string_view("\n", 1));
  }
  return h.hex_digest();
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df, double max_df_fraction) {
  if (!(max_df_fraction > 0.0 && max_df_fraction <= 1.0))
    throw ConfigError("max_df_fraction must be in (0, 1]");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus.documents()) {
    std::set<std::string> unique(doc.tokens.begin(), doc.tokens.end());
    for (const auto& t : unique) ++df[t];
  }
  const double max_df = max_df_fraction * static_cast<double>(corpus.size());
  std::vector<std::string> tokens;
  std::vector<std::size_t> freq;
  for (const auto& [token, count] : df) {
    if (count < min_df || static_cast<double>(count) > max_df) continue;
    tokens.push_back(token);
    freq.push_back(count);
  }
  if (tokens.empty()) throw DataError("vocabulary is empty after document-frequency filtering");
  return Vocabulary(std::move(tokens), std::move(freq));
}

std::string tokens_jsonl(const Corpus& corpus, bool full) {
  std::string out;
  for (const auto& doc : corpus.documents()) {
    json line;
    line["id"] = doc.id;
    line["side"] = static_cast<int>(doc.side);
    line["tokens"] = doc.tokens;
    if (full) {
      line["source"] = doc.source;
      line["date"] = doc.date;
      line["text"] = doc.raw_text;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

Corpus parse_tokens_jsonl(const std::string& text) {
  std::vector<Document> docs;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json obj = json::parse(line);
      Document doc;
      doc.id = obj.at("id").get<std::string>();
      const int side = obj.at("side").get<int>();
      if (side != 0 && side != 1) throw DataError("side must be 0 or 1");
      doc.side = static_cast<Side>(side);
      doc.tokens = obj.at("tokens").get<std::vector<std::string>>();
      doc.source = obj.value("source", std::string());
      doc.date = obj.value("date", std::string());
      doc.raw_text = obj.value("text", std::string());
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw DataError("tokens line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Corpus(std::move(docs));
}

}  // namespace pacte
