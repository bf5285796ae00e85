#include "pacte/topics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"

namespace pacte {

using json = nlohmann::json;

std::span<const double> LdaModel::phi_row(int topic) const {
  if (topic < 0 || topic >= num_topics) throw ConfigError("topic " + std::to_string(topic) + " out of range");
  return std::span<const double>(phi).subspan(static_cast<std::size_t>(topic) * vocab_size, vocab_size);
}

std::span<const double> LdaModel::theta_row(std::size_t doc) const {
  return std::span<const double>(theta).subspan(doc * num_topics, num_topics);
}

std::vector<std::vector<int>> to_word_ids(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    std::vector<int> ids;
    ids.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens)
      if (auto idx = vocab.index(t)) ids.push_back(static_cast<int>(*idx));
    if (ids.empty()) throw DataError("document '" + doc.id + "' has no in-vocabulary tokens");
    out.push_back(std::move(ids));
  }
  return out;
}

GibbsSampler::GibbsSampler(std::vector<std::vector<int>> docs, std::size_t vocab_size,
                           int num_topics, double alpha, double beta, std::uint64_t seed)
    : docs_(std::move(docs)),
      vocab_size_(vocab_size),
      num_topics_(num_topics),
      alpha_(alpha),
      beta_(beta),
      n_dk_(docs_.size() * num_topics, 0),
      n_kw_(static_cast<std::size_t>(num_topics) * vocab_size, 0),
      n_k_(num_topics, 0),
      weights_(num_topics),
      rng_(seed) {
  if (num_topics < 1) throw ConfigError("number of topics must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("LDA priors must be positive");
  z_.resize(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    z_[d].resize(docs_[d].size());
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int w = docs_[d][i];
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size_)
        throw DataError("word id out of vocabulary range");
      const int k = static_cast<int>(rng_.below(num_topics_));
      z_[d][i] = k;
      ++n_dk_[d * num_topics_ + k];
      ++n_kw_[k * vocab_size_ + w];
      ++n_k_[k];
    }
  }
}

void GibbsSampler::sweep() {
  const double vbeta = static_cast<double>(vocab_size_) * beta_;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    int* ndk = &n_dk_[d * num_topics_];
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int w = docs_[d][i];
      int k = z_[d][i];
      --ndk[k];
      --n_kw_[k * vocab_size_ + w];
      --n_k_[k];
      double total = 0.0;
      for (int t = 0; t < num_topics_; ++t) {
        total += (ndk[t] + alpha_) * (n_kw_[t * vocab_size_ + w] + beta_) / (n_k_[t] + vbeta);
        weights_[t] = total;
      }
      const double u = rng_.uniform() * total;
      k = static_cast<int>(std::upper_bound(weights_.begin(), weights_.end(), u) - weights_.begin());
      if (k >= num_topics_) k = num_topics_ - 1;
      z_[d][i] = k;
      ++ndk[k];
      ++n_kw_[k * vocab_size_ + w];
      ++n_k_[k];
    }
  }
}

std::vector<double> GibbsSampler::phi() const {
  std::vector<double> out(n_kw_.size());
  const double vbeta = static_cast<double>(vocab_size_) * beta_;
  for (int k = 0; k < num_topics_; ++k)
    for (std::size_t w = 0; w < vocab_size_; ++w)
      out[k * vocab_size_ + w] = (n_kw_[k * vocab_size_ + w] + beta_) / (n_k_[k] + vbeta);
  return out;
}

std::vector<double> GibbsSampler::theta() const {
  std::vector<double> out(n_dk_.size());
  const double kalpha = num_topics_ * alpha_;
  for (std::size_t d = 0; d < docs_.size(); ++d)
    for (int k = 0; k < num_topics_; ++k)
      out[d * num_topics_ + k] =
          (n_dk_[d * num_topics_ + k] + alpha_) / (static_cast<double>(docs_[d].size()) + kalpha);
  return out;
}

LdaModel train_lda(const Corpus& corpus, const Vocabulary& vocab, const LdaParams& params) {
  if (params.num_topics < 1) throw ConfigError("number of topics must be positive");
  if (params.iterations < 1) throw ConfigError("LDA iterations must be at least 1");
  if (params.average_last < 0 || params.average_last > params.iterations)
    throw ConfigError("average_last must lie in [0, iterations]");
  auto docs = to_word_ids(corpus, vocab);
  std::size_t total = 0;
  for (const auto& d : docs) total += d.size();
  if (static_cast<std::size_t>(params.num_topics) > total)
    throw ConfigError("K = " + std::to_string(params.num_topics) + " exceeds the " +
                      std::to_string(total) + " tokens in the corpus");

  const double alpha = params.resolved_alpha();
  GibbsSampler sampler(std::move(docs), vocab.size(), params.num_topics, alpha, params.beta,
                       params.seed);
  std::vector<double> phi_sum, theta_sum;
  for (int it = 0; it < params.iterations; ++it) {
    sampler.sweep();
    if (params.average_last > 0 && it >= params.iterations - params.average_last) {
      auto phi = sampler.phi();
      auto theta = sampler.theta();
      if (phi_sum.empty()) {
        phi_sum.assign(phi.size(), 0.0);
        theta_sum.assign(theta.size(), 0.0);
      }
      for (std::size_t i = 0; i < phi.size(); ++i) phi_sum[i] += phi[i];
      for (std::size_t i = 0; i < theta.size(); ++i) theta_sum[i] += theta[i];
    }
  }

  LdaModel model;
  model.num_topics = params.num_topics;
  model.alpha = alpha;
  model.beta = params.beta;
  model.vocab_size = vocab.size();
  model.seed = params.seed;
  model.iterations = params.iterations;
  model.vocab_hash = vocab.hash();
  for (const auto& doc : corpus.documents()) model.doc_ids.push_back(doc.id);
  if (params.average_last > 0) {
    for (auto& x : phi_sum) x /= params.average_last;
    for (auto& x : theta_sum) x /= params.average_last;
    model.phi = std::move(phi_sum);
    model.theta = std::move(theta_sum);
  } else {
    model.phi = sampler.phi();
    model.theta = sampler.theta();
  }
  model.assignments = sampler.assignments();
  return model;
}

TopicKeywords top_keywords(const LdaModel& model, const Vocabulary& vocab, int topic,
                           std::size_t m) {
  if (vocab.size() != model.vocab_size) throw DataError("vocabulary does not match the LDA model");
  auto row = model.phi_row(topic);
  if (m == 0 || m > row.size()) throw ConfigError("keyword count m must lie in [1, V]");
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return row[a] != row[b] ? row[a] > row[b] : a < b;
                    });
  TopicKeywords out;
  out.topic = topic;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += row[order[i]];
  for (std::size_t i = 0; i < m; ++i)
    out.entries.push_back({vocab.token(order[i]), order[i], row[order[i]] / total});
  return out;
}

TopicDocs top_documents(const LdaModel& model, const Corpus& corpus,
                        std::span<const std::size_t> doc_indices, int topic, std::size_t n,
                        std::string corpus_label) {
  if (topic < 0 || topic >= model.num_topics)
    throw ConfigError("topic " + std::to_string(topic) + " out of range");
  if (doc_indices.empty())
    throw DataError("corpus '" + corpus_label + "' has no documents");
  if (model.num_docs() != corpus.size()) throw DataError("LDA model does not cover this corpus");
  if (n == 0) throw ConfigError("document count n must be positive");

  struct Candidate {
    double share;
    const std::string* id;
    std::size_t doc;
  };
  std::vector<Candidate> cands;
  cands.reserve(doc_indices.size());
  for (std::size_t d : doc_indices) {
    if (model.doc_ids[d] != corpus[d].id)
      throw DataError("LDA model document order does not match corpus at '" + corpus[d].id + "'");
    cands.push_back({model.theta_row(d)[topic], &corpus[d].id, d});
  }
  const std::size_t keep = std::min(n, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.share != b.share ? a.share > b.share : *a.id < *b.id;
                    });
  TopicDocs out;
  out.topic = topic;
  out.corpus_label = std::move(corpus_label);
  double total = 0.0;
  for (std::size_t i = 0; i < keep; ++i) total += cands[i].share;
  for (std::size_t i = 0; i < keep; ++i)
    out.entries.push_back({*cands[i].id, cands[i].doc, cands[i].share / total});
  return out;
}

TopicDocs top_documents(const LdaModel& model, const Corpus& corpus, Side side, int topic,
                        std::size_t n) {
  const auto idx = corpus.indices(side);
  return top_documents(model, corpus, idx, topic, n, to_string(side));
}

double npmi(std::size_t count_i, std::size_t count_j, std::size_t count_ij,
            std::size_t num_docs, double epsilon) {
  const double n = static_cast<double>(num_docs);
  const double pi = (static_cast<double>(count_i) + epsilon) / n;
  const double pj = (static_cast<double>(count_j) + epsilon) / n;
  const double pij = (static_cast<double>(count_ij) + epsilon) / n;
  const double denom = -std::log(pij);
  // Joint probability of one: perfect association.
  if (denom <= 0.0) return 1.0;
  const double value = std::log(pij / (pi * pj)) / denom;
  return std::clamp(value, -1.0, 1.0);
}

CoherenceScore coherence_npmi(const LdaModel& model, const Corpus& corpus,
                              const Vocabulary& vocab, std::size_t m, double epsilon) {
  if (m < 2) throw ConfigError("coherence needs at least two keywords per topic");
  if (corpus.size() == 0) throw DataError("coherence needs a non-empty corpus");
  // Unique in-vocabulary word ids per document.
  std::vector<std::vector<int>> doc_words;
  doc_words.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    std::vector<int> ids;
    for (const auto& t : doc.tokens)
      if (auto i = vocab.index(t)) ids.push_back(static_cast<int>(*i));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    doc_words.push_back(std::move(ids));
  }

  CoherenceScore score;
  score.num_topics = model.num_topics;
  const std::size_t keep = std::min(m, model.vocab_size);
  std::vector<int> slot(model.vocab_size, -1);
  for (int k = 0; k < model.num_topics; ++k) {
    auto kw = top_keywords(model, vocab, k, keep);
    for (std::size_t i = 0; i < kw.entries.size(); ++i)
      slot[kw.entries[i].word] = static_cast<int>(i);
    std::vector<std::size_t> df(keep, 0);
    std::vector<std::size_t> co(keep * keep, 0);
    std::vector<int> present;
    for (const auto& words : doc_words) {
      present.clear();
      for (int w : words)
        if (slot[w] >= 0) present.push_back(slot[w]);
      for (std::size_t a = 0; a < present.size(); ++a) {
        ++df[present[a]];
        for (std::size_t b = a + 1; b < present.size(); ++b) {
          const auto i = std::min(present[a], present[b]);
          const auto j = std::max(present[a], present[b]);
          ++co[i * keep + j];
        }
      }
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < keep; ++i)
      for (std::size_t j = i + 1; j < keep; ++j) {
        sum += npmi(df[i], df[j], co[i * keep + j], corpus.size(), epsilon);
        ++pairs;
      }
    score.per_topic.push_back(sum / static_cast<double>(pairs));
    for (const auto& e : kw.entries) slot[e.word] = -1;
  }
  score.value = std::accumulate(score.per_topic.begin(), score.per_topic.end(), 0.0) /
                static_cast<double>(score.per_topic.size());
  return score;
}

SelectKResult select_k(const Corpus& corpus, const Vocabulary& vocab, int k_min, int k_max,
                       const LdaParams& params, std::size_t m, double epsilon) {
  if (k_min < 2 || k_min > k_max) throw ConfigError("K grid must satisfy 2 <= k_min <= k_max");
  // Chains are independent and own their state.
  std::vector<std::future<std::pair<LdaModel, CoherenceScore>>> jobs;
  for (int k = k_min; k <= k_max; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      LdaParams p = params;
      p.num_topics = k;
      LdaModel model = train_lda(corpus, vocab, p);
      CoherenceScore score = coherence_npmi(model, corpus, vocab, m, epsilon);
      return std::make_pair(std::move(model), std::move(score));
    }));
  }
  SelectKResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (auto& job : jobs) {
    auto [model, score] = job.get();
    result.scores.push_back(score);
    if (score.value > best) {
      best = score.value;
      result.model = std::move(model);
    }
  }
  return result;
}

SyntheticCorpus generate_synthetic_corpus(int num_topics, std::size_t vocab_size,
                                          std::size_t num_docs, std::size_t doc_len,
                                          double alpha, double beta, std::uint64_t seed,
                                          bool disjoint_support) {
  if (num_topics < 1) throw ConfigError("synthetic corpus needs at least one topic");
  if (vocab_size < static_cast<std::size_t>(num_topics))
    throw ConfigError("synthetic corpus needs V >= K");
  if (doc_len == 0) throw ConfigError("synthetic documents must be non-empty");
  Rng rng(seed);
  SyntheticCorpus out;
  const int width = static_cast<int>(std::to_string(vocab_size - 1).size());
  for (std::size_t w = 0; w < vocab_size; ++w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%0*zu", width, w);
    out.words.emplace_back(buf);
  }
  const auto K = static_cast<std::size_t>(num_topics);
  out.phi.assign(K * vocab_size, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t lo = 0, hi = vocab_size;
    if (disjoint_support) {
      lo = k * vocab_size / K;
      hi = (k + 1) * vocab_size / K;
    }
    auto draw = rng.dirichlet(hi - lo, beta);
    for (std::size_t w = lo; w < hi; ++w) out.phi[k * vocab_size + w] = draw[w - lo];
  }
  out.theta.assign(num_docs * K, 0.0);
  std::vector<Document> docs;
  const int dwidth = static_cast<int>(std::to_string(num_docs > 0 ? num_docs - 1 : 0).size());
  for (std::size_t d = 0; d < num_docs; ++d) {
    auto theta = rng.dirichlet(K, alpha);
    std::copy(theta.begin(), theta.end(), out.theta.begin() + static_cast<std::ptrdiff_t>(d * K));
    Document doc;
    char buf[32];
    std::snprintf(buf, sizeof buf, "doc%0*zu", dwidth, d);
    doc.id = buf;
    doc.side = d % 2 == 0 ? Side::Liberal : Side::Conservative;
    doc.source = d % 2 == 0 ? "synthetic_left" : "synthetic_right";
    doc.date = "2020-01-01";
    for (std::size_t i = 0; i < doc_len; ++i) {
      const std::size_t k = rng.categorical(theta);
      const std::size_t w = rng.categorical(
          std::span<const double>(out.phi).subspan(k * vocab_size, vocab_size));
      doc.tokens.push_back(out.words[w]);
    }
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (i) doc.raw_text += ' ';
      doc.raw_text += doc.tokens[i];
    }
    docs.push_back(std::move(doc));
  }
  out.corpus = Corpus(std::move(docs));
  return out;
}

void save_lda(const LdaModel& model, const std::filesystem::path& dir) {
  json header;
  header["K"] = model.num_topics;
  header["alpha"] = model.alpha;
  header["beta"] = model.beta;
  header["V"] = model.vocab_size;
  header["D"] = model.num_docs();
  header["seed"] = model.seed;
  header["iterations"] = model.iterations;
  header["vocab_hash"] = model.vocab_hash;
  header["doc_ids"] = model.doc_ids;
  header["phi"] = "phi.bin";
  header["theta"] = "theta.bin";
  io::write_file_atomic(dir / "phi.bin", io::encode_f64_array(model.phi));
  io::write_file_atomic(dir / "theta.bin", io::encode_f64_array(model.theta));
  io::write_file_atomic(dir / "model.json", header.dump(2) + "\n");
}

LdaModel load_lda(const std::filesystem::path& dir) {
  const json header = json::parse(io::read_file(dir / "model.json"));
  LdaModel model;
  model.num_topics = header.at("K").get<int>();
  model.alpha = header.at("alpha").get<double>();
  model.beta = header.at("beta").get<double>();
  model.vocab_size = header.at("V").get<std::size_t>();
  model.seed = header.at("seed").get<std::uint64_t>();
  model.iterations = header.value("iterations", 0);
  model.vocab_hash = header.at("vocab_hash").get<std::string>();
  model.doc_ids = header.at("doc_ids").get<std::vector<std::string>>();
  model.phi = io::decode_f64_array(io::read_file(dir / header.at("phi").get<std::string>()));
  model.theta = io::decode_f64_array(io::read_file(dir / header.at("theta").get<std::string>()));
  if (model.phi.size() != static_cast<std::size_t>(model.num_topics) * model.vocab_size)
    throw DataError("phi matrix size does not match K x V");
  if (model.theta.size() != model.num_docs() * model.num_topics)
    throw DataError("theta matrix size does not match D x K");
  return model;
}

}  // namespace pacte
