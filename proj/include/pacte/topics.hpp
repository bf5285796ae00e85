#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pacte/corpus.hpp"
#include "pacte/random.hpp"

namespace pacte {

struct LdaParams {
  int num_topics = 10;
  // Non-positive alpha selects 50 / K.
  double alpha = 0.0;
  double beta = 0.01;
  int iterations = 1000;
  std::uint64_t seed = 1;
  // Average the point estimates over this many final sweeps; 0 keeps the
  // final sample only.
  int average_last = 0;

  double resolved_alpha() const { return alpha > 0.0 ? alpha : 50.0 / num_topics; }
};

struct LdaModel {
  int num_topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::string vocab_hash;
  std::vector<std::string> doc_ids;       // theta row order
  std::vector<double> phi;                // K x V, row-major
  std::vector<double> theta;              // D x K, row-major
  std::vector<std::vector<int>> assignments;

  std::size_t num_docs() const { return doc_ids.size(); }
  std::span<const double> phi_row(int topic) const;
  std::span<const double> theta_row(std::size_t doc) const;
};

// Maps each document's tokens to vocabulary ids, dropping out-of-vocabulary
// tokens. Throws naming the first document left without tokens.
std::vector<std::vector<int>> to_word_ids(const Corpus& corpus, const Vocabulary& vocab);

// Collapsed Gibbs sampler over fixed word-id documents. Exposed for tests
// that inspect the count tables between sweeps.
class GibbsSampler {
 public:
  GibbsSampler(std::vector<std::vector<int>> docs, std::size_t vocab_size, int num_topics,
               double alpha, double beta, std::uint64_t seed);

  void sweep();

  int num_topics() const { return num_topics_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t num_docs() const { return docs_.size(); }
  int doc_topic_count(std::size_t doc, int topic) const { return n_dk_[doc * num_topics_ + topic]; }
  int topic_word_count(int topic, std::size_t word) const { return n_kw_[topic * vocab_size_ + word]; }
  int topic_count(int topic) const { return n_k_[topic]; }
  std::size_t doc_length(std::size_t doc) const { return docs_[doc].size(); }
  const std::vector<std::vector<int>>& assignments() const { return z_; }

  std::vector<double> phi() const;
  std::vector<double> theta() const;

 private:
  std::vector<std::vector<int>> docs_;
  std::vector<std::vector<int>> z_;
  std::size_t vocab_size_;
  int num_topics_;
  double alpha_;
  double beta_;
  std::vector<int> n_dk_;
  std::vector<int> n_kw_;
  std::vector<int> n_k_;
  std::vector<double> weights_;
  Rng rng_;
};

LdaModel train_lda(const Corpus& corpus, const Vocabulary& vocab, const LdaParams& params);

struct KeywordWeight {
  std::string token;
  std::size_t word = 0;  // vocabulary index
  double weight = 0.0;
};

// Top-m keywords of a topic, weights renormalized over the kept entries.
struct TopicKeywords {
  int topic = 0;
  std::vector<KeywordWeight> entries;
};

TopicKeywords top_keywords(const LdaModel& model, const Vocabulary& vocab, int topic,
                           std::size_t m);

struct DocWeight {
  std::string doc_id;
  std::size_t doc = 0;  // corpus index
  double weight = 0.0;
};

// Top-n documents of one corpus view for a topic, ranked by the topic's share
// in each document and renormalized over the kept entries.
struct TopicDocs {
  int topic = 0;
  std::string corpus_label;
  std::vector<DocWeight> entries;
};

TopicDocs top_documents(const LdaModel& model, const Corpus& corpus,
                        std::span<const std::size_t> doc_indices, int topic, std::size_t n,
                        std::string corpus_label);
TopicDocs top_documents(const LdaModel& model, const Corpus& corpus, Side side, int topic,
                        std::size_t n);

struct CoherenceScore {
  int num_topics = 0;
  double value = 0.0;
  std::vector<double> per_topic;
};

// Normalized PMI of one keyword pair from document counts out of num_docs.
double npmi(std::size_t count_i, std::size_t count_j, std::size_t count_ij,
            std::size_t num_docs, double epsilon);

CoherenceScore coherence_npmi(const LdaModel& model, const Corpus& corpus,
                              const Vocabulary& vocab, std::size_t m, double epsilon = 1e-12);

struct SelectKResult {
  LdaModel model;
  std::vector<CoherenceScore> scores;
};

// Trains one model per K in [k_min, k_max] (params.num_topics ignored) and
// keeps the most coherent; ties go to the smaller K.
SelectKResult select_k(const Corpus& corpus, const Vocabulary& vocab, int k_min, int k_max,
                       const LdaParams& params, std::size_t m = 10, double epsilon = 1e-12);

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<std::string> words;  // token of each true word index
  std::vector<double> phi;         // K x V
  std::vector<double> theta;       // D x K
};

// LDA generative process. With disjoint_support each topic's word distribution
// is a Dirichlet(beta) draw over its own contiguous block of the vocabulary.
// Documents alternate Liberal / Conservative.
SyntheticCorpus generate_synthetic_corpus(int num_topics, std::size_t vocab_size,
                                          std::size_t num_docs, std::size_t doc_len,
                                          double alpha, double beta, std::uint64_t seed,
                                          bool disjoint_support = true);

void save_lda(const LdaModel& model, const std::filesystem::path& dir);
LdaModel load_lda(const std::filesystem::path& dir);

}  // namespace pacte
