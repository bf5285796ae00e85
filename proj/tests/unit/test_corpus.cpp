#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "pacte/corpus.hpp"
#include "pacte/error.hpp"

using namespace pacte;

namespace {

const SourceMap kSources = {{"cnn", Side::Liberal}, {"fox", Side::Conservative}};

Corpus ingest(const std::string& text, IngestStats* stats = nullptr) {
  std::istringstream in(text);
  return ingest_jsonl(in, kSources, stats, "test.jsonl");
}

Corpus token_corpus(const std::vector<std::vector<std::string>>& docs) {
  std::vector<Document> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.tokens = docs[i];
    out.push_back(d);
  }
  return Corpus(out);
}

}  // namespace

TEST_CASE("side parsing") {
  CHECK(parse_side("Liberal") == Side::Liberal);
  CHECK(parse_side("conservative") == Side::Conservative);
  CHECK_THROWS_AS(parse_side("centrist"), ConfigError);
}

TEST_CASE("ingest") {
  SUBCASE("valid lines, duplicate text skipped") {
    IngestStats stats;
    const auto c = ingest(
        R"({"id":"a","source":"cnn","date":"2020-01-02","text":"Hello world"})"
        "\n\n"
        R"({"id":"b","source":"fox","date":"2020-01-02T10:00:00Z","text":"Hello world"})"
        "\n"
        R"({"id":"c","source":"fox","date":"2020-01-03","text":"Other"})"
        "\n",
        &stats);
    CHECK(c.size() == 2);
    CHECK(stats.lines == 3);
    CHECK(stats.duplicate_texts == 1);
    CHECK(c[1].side == Side::Conservative);
    CHECK(c.find("c").has_value());
  }
  SUBCASE("errors name the line") {
    auto message = [](const std::string& text) {
      try {
        ingest(text);
      } catch (const DataError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("{bad json\n").find("test.jsonl:1") != std::string::npos);
    CHECK(message(R"({"id":"a","source":"msnbc","date":"2020-01-02","text":"x"})").find("msnbc") !=
          std::string::npos);
    CHECK(message(R"({"id":"a","source":"cnn","date":"yesterday","text":"x"})").find("date") !=
          std::string::npos);
    CHECK(message(R"({"id":"a","source":"cnn","date":"2020-01-02"})").find("text") != std::string::npos);
    const std::string dup = R"({"id":"a","source":"cnn","date":"2020-01-02","text":"x"})"
                            "\n"
                            R"({"id":"a","source":"cnn","date":"2020-01-02","text":"y"})";
    CHECK(message(dup).find("test.jsonl:2: duplicate id 'a'") != std::string::npos);
  }
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Don't stop\u2014it's 2020!", true) == std::vector<std::string>{"don't", "stop", "it's", "2020"});
  CHECK(tokenize("rock’n roll 'quoted'", true) ==
        std::vector<std::string>{"rock'n", "roll", "quoted"});
  CHECK(tokenize("Émilie GÖTZ", true) == std::vector<std::string>{"émilie", "götz"});
  CHECK(tokenize("Keep Case", false) == std::vector<std::string>{"Keep", "Case"});
}

TEST_CASE("preprocess") {
  PreprocessConfig pc;
  CHECK(preprocess_text("CNN reported the briefing.", pc) ==
        std::vector<std::string>{"reported", "briefing"});
  CHECK(preprocess_text("Fox Fox fox", pc).empty());
  pc.lemmas = std::unordered_map<std::string, std::string>{{"reported", "report"}, {"was", "be"}};
  CHECK(preprocess_text("CNN reported the briefing.", pc) ==
        std::vector<std::string>{"report", "briefing"});
  // No output token is a stopword.
  for (const auto& t : preprocess_text("It was the best of times and the worst of fox news", pc)) {
    CHECK(pc.stopwords.count(t) == 0);
    CHECK(pc.extra_stopwords.count(t) == 0);
  }
}

TEST_CASE("bigrams") {
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 6; ++i) docs.push_back({"white", "house", "press", "x" + std::to_string(i)});
  docs.push_back({"white", "paper", "house", "party"});
  const Corpus c = token_corpus(docs);
  // count(white,house)=6, count(white)=7, count(house)=7, N=28.
  CHECK(bigram_score(6, 7, 7, 28, 5) == doctest::Approx((6.0 - 5.0) * 28.0 / 49.0));
  auto [model, merged] = bigram_transform(c, 5, 0.5);
  CHECK(model.merges("white", "house"));
  CHECK(merged[0].tokens == std::vector<std::string>{"white_house", "press", "x0"});
  CHECK(merged[6].tokens == std::vector<std::string>{"white", "paper", "house", "party"});
  // Fixed point: applying the fitted model again merges nothing new.
  const BigramModel again = fit_bigrams(merged, 5, 0.5);
  for (const auto& d : merged.documents())
    for (std::size_t i = 0; i + 1 < d.tokens.size(); ++i) CHECK_FALSE(again.merges(d.tokens[i], d.tokens[i + 1]));
  CHECK_THROWS_AS(fit_bigrams(c, 0, 1.0), ConfigError);
}

TEST_CASE("vocabulary") {
  const Corpus c = token_corpus({{"b", "a", "z"}, {"a", "c"}, {"a", "b"}});
  const auto all = build_vocabulary(c, 1, 1.0);
  CHECK(all.tokens() == std::vector<std::string>{"a", "b", "c", "z"});
  CHECK(all.document_frequency(0) == 3);
  const auto trimmed = build_vocabulary(c, 2, 0.7);
  CHECK(trimmed.tokens() == std::vector<std::string>{"b"});
  CHECK_THROWS_AS(build_vocabulary(c, 4, 1.0), DataError);
  CHECK(all.hash() == build_vocabulary(c, 1, 1.0).hash());
  CHECK(all.hash() != trimmed.hash());
}

TEST_CASE("tokens JSONL round trip") {
  const auto c = ingest(R"({"id":"a","source":"fox","date":"2020-01-02","text":"Tax cuts, tax cuts!"})");
  const Corpus p = preprocess(c, PreprocessConfig{});
  const std::string slim = tokens_jsonl(p);
  CHECK(slim == "{\"id\":\"a\",\"side\":1,\"tokens\":[\"tax\",\"cuts\",\"tax\",\"cuts\"]}\n");
  const Corpus back = parse_tokens_jsonl(tokens_jsonl(p, true));
  CHECK(back[0].tokens == p[0].tokens);
  CHECK(back[0].source == "fox");
  CHECK(back[0].raw_text == "Tax cuts, tax cuts!");
}
