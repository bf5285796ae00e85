#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "pacte/encoder.hpp"
#include "pacte/error.hpp"

using namespace pacte;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d_model = 8;
  c.n_heads = 1;
  c.n_layers = 1;
  c.ffn_dim = 16;
  c.max_len = 8;
  return c;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.ffn_dim = 32;
  c.max_len = 16;
  return c;
}

std::vector<std::string> vocab_of(const Corpus& corpus) {
  std::set<std::string> s;
  for (const auto& d : corpus.documents()) s.insert(d.tokens.begin(), d.tokens.end());
  return {s.begin(), s.end()};
}

Document doc_of(std::vector<std::string> tokens, Side side = Side::Liberal, std::string id = "d") {
  Document d;
  d.id = std::move(id);
  d.side = side;
  d.tokens = std::move(tokens);
  return d;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c;
  c.d_model = 10;
  c.n_heads = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.max_len = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(EncoderConfig{}.validate());
}

TEST_CASE("analytic gradient matches central differences on every parameter") {
  EncoderModel model(tiny_config(), {"apple", "bread", "cheese", "dates", "eggs"}, 7);
  const std::vector<std::vector<int>> docs = {
      model.token_ids(std::vector<std::string>{"apple", "bread", "cheese", "apple"}),
      model.token_ids(std::vector<std::string>{"dates", "eggs", "unknownword", "bread", "eggs"})};
  const std::vector<double> targets = {1.0, 0.0};

  auto& params = model.parameters();
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t d = 0; d < docs.size(); ++d) model.loss_and_gradient(docs[d], targets[d], grad, 0.5);
  auto total_loss = [&] {
    double l = 0.0;
    for (std::size_t d = 0; d < docs.size(); ++d) l += 0.5 * model.loss(docs[d], targets[d]);
    return l;
  };
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = total_loss();
    params[i] = saved - h;
    const double down = total_loss();
    params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
    if (grad[i] != 0.0) ++nonzero;
  }
  MESSAGE("worst relative error " << worst << " over " << params.size() << " parameters");
  CHECK(worst < 1e-4);
  CHECK(nonzero > params.size() / 2);
}

TEST_CASE("attention rows are probability vectors") {
  EncoderModel model(small_config(), {"a", "b", "c"}, 3);
  const auto ids = model.token_ids(std::vector<std::string>{"a", "b", "c", "a", "b"});
  const auto tr = model.forward(ids);
  const std::size_t T = ids.size();
  for (const auto& layer : tr.layers)
    for (std::size_t r = 0; r < layer.attn.size() / T; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < T; ++j) s += layer.attn[r * T + j];
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
}

TEST_CASE("encode: truncation, determinism and context sensitivity") {
  EncoderConfig cfg = small_config();
  EncoderModel model(cfg, fixture::numbered("w", 30), 11);
  SUBCASE("doc longer than max_len keeps max_len - 1 rows") {
    std::vector<std::string> toks;
    for (int i = 0; i < cfg.max_len + 50; ++i) toks.push_back("w" + std::to_string(i % 30));
    const auto enc = encode(model, doc_of(toks));
    CHECK(enc.num_tokens() == static_cast<std::size_t>(cfg.max_len - 1));
    CHECK(enc.token_vectors.size() == enc.num_tokens() * enc.dim);
    CHECK(enc.pooled.size() == enc.dim);
  }
  SUBCASE("same doc twice is bit-identical") {
    const auto doc = doc_of({"w1", "w2", "w3", "w4"});
    const auto a = encode(model, doc);
    const auto b = encode(model, doc);
    CHECK(a.token_vectors == b.token_vectors);
    CHECK(a.pooled == b.pooled);
  }
  SUBCASE("swapping two distant tokens changes both their vectors") {
    std::vector<std::string> toks = {"w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"};
    const auto a = encode(model, doc_of(toks));
    std::swap(toks[0], toks[7]);
    const auto b = encode(model, doc_of(toks));
    // w1 moved from position 0 to 7, w8 from 7 to 0.
    auto row = [](const ContextualEncoding& e, std::size_t i) {
      return std::vector<double>(e.row(i).begin(), e.row(i).end());
    };
    CHECK(row(a, 0) != row(b, 7));
    CHECK(row(a, 7) != row(b, 0));
  }
  SUBCASE("empty document is rejected") {
    CHECK_THROWS_AS(encode(model, doc_of({})), DataError);
  }
}

TEST_CASE("classification metrics arithmetic") {
  SUBCASE("all correct") {
    const std::vector<int> y = {1, 0, 1, 0};
    const auto m = classification_metrics(y, y);
    CHECK(m.f1 == 1.0);
    CHECK(m.accuracy == 1.0);
  }
  SUBCASE("constant positive on a balanced set") {
    const std::vector<int> pred(10, 1);
    std::vector<int> truth;
    for (int i = 0; i < 10; ++i) truth.push_back(i % 2);
    const auto m = classification_metrics(pred, truth);
    CHECK(m.precision == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("coin predictions on 1000 balanced docs") {
    Rng rng(5);
    std::vector<int> pred, truth;
    for (int i = 0; i < 1000; ++i) {
      truth.push_back(i % 2);
      pred.push_back(static_cast<int>(rng.below(2)));
    }
    CHECK(std::abs(classification_metrics(pred, truth).accuracy - 0.5) <= 0.05);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(classification_metrics({}, {}), DataError);
    EncoderModel model(tiny_config(), {"a"}, 1);
    CHECK_THROWS_AS(evaluate_classifier(model, Corpus{}), DataError);
  }
}

TEST_CASE("topicality split") {
  std::vector<Document> docs = {doc_of({"a"}, Side::Liberal, "x"), doc_of({"b"}, Side::Liberal, "y")};
  const Corpus corpus(docs);
  const std::vector<double> theta = {0.05, 0.1, 0.9, 0.1};
  auto [train, validation] = split_by_topicality(corpus, theta, 2, 0.15);
  REQUIRE(train.size() == 1);
  REQUIRE(validation.size() == 1);
  CHECK(train[0].id == "y");
  CHECK(validation[0].id == "x");
  CHECK_THROWS_AS(split_by_topicality(corpus, theta, 2, 0.0), ConfigError);
  CHECK_THROWS_AS(split_by_topicality(corpus, theta, 2, 1.0), ConfigError);
  CHECK_THROWS_AS(split_by_topicality(corpus, std::vector<double>{0.5}, 2), DataError);
}

TEST_CASE("label handling") {
  const Corpus corpus = fixture::marker_corpus(40, 3);
  EncoderModel initial(small_config(), vocab_of(corpus), 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.learning_rate = 1e-3;

  SUBCASE("label_mode none returns the parameters unchanged") {
    tc.label_mode = LabelMode::None;
    const auto r = train_partisanship(initial, corpus, corpus, tc);
    CHECK(r.model.parameters() == initial.parameters());
    CHECK(r.history.empty());
  }
  SUBCASE("shuffled labels are a reproducible permutation of the multiset") {
    const auto a = shuffled_labels(corpus, 9);
    const auto b = shuffled_labels(corpus, 9);
    CHECK(a == b);
    std::vector<Side> original;
    for (const auto& d : corpus.documents()) original.push_back(d.side);
    CHECK(a != original);
    CHECK(std::count(a.begin(), a.end(), Side::Liberal) ==
          std::count(original.begin(), original.end(), Side::Liberal));
  }
  SUBCASE("single-class training set is rejected") {
    std::vector<Document> docs;
    for (const auto& d : corpus.documents())
      if (d.side == Side::Liberal) docs.push_back(d);
    CHECK_THROWS_AS(train_partisanship(initial, Corpus(docs), corpus, tc), DataError);
  }
  SUBCASE("training is deterministic per seed") {
    const auto a = train_partisanship(initial, corpus, corpus, tc);
    const auto b = train_partisanship(initial, corpus, corpus, tc);
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(a.history.size() == 2);
  }
  SUBCASE("empty validation falls back to the training set") {
    const auto r = train_partisanship(initial, corpus, Corpus{}, tc);
    CHECK(r.validated_on_train);
  }
  SUBCASE("an exploding learning rate surfaces as a numeric error or finite result") {
    tc.learning_rate = 1e300;
    tc.epochs = 3;
    try {
      train_partisanship(initial, corpus, corpus, tc);
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
    }
  }
}

TEST_CASE("marker corpus is learnable with a small encoder") {
  const Corpus train = fixture::marker_corpus(200, 21);
  const Corpus validation = fixture::marker_corpus(100, 22, 10, "v");
  EncoderModel initial(small_config(), vocab_of(train), 21);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 16;
  tc.epochs = 15;
  const auto r = train_partisanship(initial, train, validation, tc);
  CHECK(evaluate_classifier(r.model, validation).f1 >= 0.95);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
}

TEST_CASE("save and load round trip") {
  fixture::TempDir dir("encoder");
  EncoderModel model(small_config(), {"x", "y", "z"}, 4);
  model.save(dir.path());
  const auto loaded = EncoderModel::load(dir.path());
  CHECK(loaded.parameters() == model.parameters());
  CHECK(loaded.vocabulary() == model.vocabulary());
  const auto doc = doc_of({"x", "z", "y"});
  CHECK(encode(loaded, doc).token_vectors == encode(model, doc).token_vectors);
}
