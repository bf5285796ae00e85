#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "pacte/error.hpp"
#include "pacte/topics.hpp"

using namespace pacte;

namespace {

Corpus token_corpus(const std::vector<std::vector<std::string>>& docs) {
  std::vector<Document> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.side = i % 2 ? Side::Conservative : Side::Liberal;
    d.tokens = docs[i];
    out.push_back(d);
  }
  return Corpus(out);
}

// Model with hand-set phi/theta for the truncation rules.
LdaModel manual_model(std::vector<double> phi, std::size_t vocab_size, std::vector<double> theta,
                      std::vector<std::string> doc_ids, int k) {
  LdaModel m;
  m.num_topics = k;
  m.vocab_size = vocab_size;
  m.phi = std::move(phi);
  m.theta = std::move(theta);
  m.doc_ids = std::move(doc_ids);
  return m;
}

std::vector<std::size_t> top_words(std::span<const double> row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return row[a] > row[b]; });
  idx.resize(k);
  return idx;
}

}  // namespace

TEST_CASE("single document, single topic") {
  const Corpus c = token_corpus({{"a", "a", "a"}});
  const auto vocab = build_vocabulary(c, 1, 1.0);
  LdaParams p;
  p.num_topics = 1;
  p.iterations = 5;
  const auto m = train_lda(c, vocab, p);
  CHECK(m.phi[0] == doctest::Approx((3 + p.beta) / (3 + 1 * p.beta)));
  CHECK(m.theta[0] == 1.0);
}

TEST_CASE("Gibbs counts conserve mass and chains are deterministic") {
  const auto syn = generate_synthetic_corpus(3, 30, 40, 20, 0.5, 1.0, 3);
  const auto vocab = build_vocabulary(syn.corpus, 1, 1.0);
  GibbsSampler s(to_word_ids(syn.corpus, vocab), vocab.size(), 3, 0.5, 0.01, 9);
  for (int sweep = 0; sweep < 5; ++sweep) {
    s.sweep();
    for (std::size_t d = 0; d < s.num_docs(); ++d) {
      int total = 0;
      for (int k = 0; k < 3; ++k) total += s.doc_topic_count(d, k);
      CHECK(total == static_cast<int>(s.doc_length(d)));
    }
    for (int k = 0; k < 3; ++k) {
      int total = 0;
      for (std::size_t w = 0; w < vocab.size(); ++w) total += s.topic_word_count(k, w);
      CHECK(total == s.topic_count(k));
    }
  }
  LdaParams p;
  p.num_topics = 3;
  p.iterations = 20;
  const auto a = train_lda(syn.corpus, vocab, p);
  const auto b = train_lda(syn.corpus, vocab, p);
  CHECK(a.assignments == b.assignments);
  CHECK(a.phi == b.phi);
  for (int k = 0; k < 3; ++k) {
    const auto row = a.phi_row(k);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : row) CHECK(v > 0);
  }
  for (std::size_t d = 0; d < a.num_docs(); ++d) {
    const auto row = a.theta_row(d);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("train_lda errors") {
  const Corpus c = token_corpus({{"a", "b"}, {}});
  const auto vocab = build_vocabulary(token_corpus({{"a", "b"}}), 1, 1.0);
  LdaParams p;
  p.num_topics = 2;
  CHECK_THROWS_WITH_AS(train_lda(c, vocab, p), doctest::Contains("'d1'"), DataError);
  p.num_topics = 3;
  CHECK_THROWS_AS(train_lda(token_corpus({{"a", "b"}}), vocab, p), ConfigError);
}

TEST_CASE("keyword and document truncation") {
  const Vocabulary vocab({"w0", "w1", "w2"}, {1, 1, 1});
  const Corpus c = token_corpus({{"w0"}, {"w1"}, {"w2"}});
  const auto m = manual_model({0.5, 0.3, 0.2, 0.2, 0.2, 0.6}, 3,
                              {0.6, 0.4, 0.3, 0.7, 0.1, 0.9}, {"d0", "d1", "d2"}, 2);
  const auto kw = top_keywords(m, vocab, 0, 2);
  REQUIRE(kw.entries.size() == 2);
  CHECK(kw.entries[0].token == "w0");
  CHECK(kw.entries[0].weight == doctest::Approx(0.625));
  CHECK(kw.entries[1].weight == doctest::Approx(0.375));
  // Ties keep vocabulary order.
  const auto tied = top_keywords(m, vocab, 1, 3);
  CHECK(tied.entries[0].token == "w2");
  CHECK(tied.entries[1].token == "w0");
  CHECK(tied.entries[2].token == "w1");
  CHECK_THROWS_AS(top_keywords(m, vocab, 0, 4), ConfigError);

  const std::vector<std::size_t> all = {0, 1, 2};
  const auto docs = top_documents(m, c, all, 0, 2, "all");
  REQUIRE(docs.entries.size() == 2);
  CHECK(docs.entries[0].doc_id == "d0");
  CHECK(docs.entries[0].weight == doctest::Approx(2.0 / 3.0));
  CHECK(docs.entries[1].weight == doctest::Approx(1.0 / 3.0));
  const auto everything = top_documents(m, c, all, 1, 10, "all");
  CHECK(everything.entries.size() == 3);
  double total = 0;
  for (const auto& e : everything.entries) total += e.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(top_documents(m, c, std::vector<std::size_t>{}, 0, 2, "empty"), DataError);
  CHECK_THROWS_AS(top_documents(m, c, all, 2, 2, "all"), ConfigError);
}

TEST_CASE("npmi limits") {
  CHECK(npmi(10, 10, 10, 10, 1e-12) == doctest::Approx(1.0));
  CHECK(npmi(5, 5, 5, 10, 1e-12) == doctest::Approx(1.0));
  // Independent: P(i)=P(j)=1/2, P(ij)=1/4.
  CHECK(std::abs(npmi(50, 50, 25, 100, 1e-12)) < 1e-9);
  CHECK(npmi(3, 3, 0, 10, 1e-12) == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("planted topics are recovered and K is selected") {
  int recovered = 0, selected = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto syn = generate_synthetic_corpus(3, 30, 300, 50, 0.1, 1.0, seed);
    const auto vocab = build_vocabulary(syn.corpus, 1, 1.0);
    LdaParams p;
    p.num_topics = 3;
    p.alpha = 0.1;
    p.iterations = 200;
    p.seed = seed;
    const auto m = train_lda(syn.corpus, vocab, p);
    std::vector<std::vector<std::size_t>> planted, learned;
    for (int k = 0; k < 3; ++k) {
      planted.push_back(top_words(std::span<const double>(syn.phi).subspan(k * 30, 30), 5));
      std::vector<std::size_t> mapped;
      for (const auto& e : top_keywords(m, vocab, k, 5).entries)
        mapped.push_back(std::stoul(e.token.substr(1)));
      learned.push_back(mapped);
    }
    const auto overlap = oracle::greedy_topic_overlap(planted, learned);
    if (*std::min_element(overlap.begin(), overlap.end()) >= 0.8) ++recovered;
    const auto sel = select_k(syn.corpus, vocab, 2, 5, p);
    if (sel.model.num_topics == 3) ++selected;
    CHECK(sel.scores.size() == 4);
  }
  CHECK(recovered >= 2);
  CHECK(selected >= 2);
}

TEST_CASE("synthetic generator") {
  const auto a = generate_synthetic_corpus(1, 5, 4, 6, 1.0, 1.0, 2);
  for (const auto& d : a.corpus.documents()) CHECK(d.tokens.size() == 6);
  const auto b = generate_synthetic_corpus(1, 5, 4, 6, 1.0, 1.0, 2);
  CHECK(a.phi == b.phi);
  CHECK_THROWS_AS(generate_synthetic_corpus(2, 5, 4, 0, 1.0, 1.0, 2), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_corpus(6, 5, 4, 3, 1.0, 1.0, 2), ConfigError);
}

TEST_CASE("model persistence") {
  fixture::TempDir dir("lda");
  const auto syn = generate_synthetic_corpus(2, 10, 10, 8, 0.5, 1.0, 5);
  const auto vocab = build_vocabulary(syn.corpus, 1, 1.0);
  LdaParams p;
  p.num_topics = 2;
  p.iterations = 10;
  const auto m = train_lda(syn.corpus, vocab, p);
  save_lda(m, dir.path());
  const auto back = load_lda(dir.path());
  CHECK(back.phi == m.phi);
  CHECK(back.theta == m.theta);
  CHECK(back.doc_ids == m.doc_ids);
  CHECK(back.vocab_hash == vocab.hash());
  CHECK(back.num_topics == 2);
}
