#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pacte/embedding_store.hpp"
#include "pacte/topics.hpp"

namespace pacte {

using Vector = std::vector<double>;

// Mean of the rows whose token equals keyword; none when absent.
std::optional<Vector> dc_keyword_embedding(const ContextualEncoding& encoding,
                                           const std::string& keyword);

struct UsedKeyword {
  std::string token;
  double weight = 0.0;
};

struct DcTopicEmbedding {
  std::string doc_id;
  int topic = 0;
  Vector vector;
  std::vector<UsedKeyword> used_keywords;  // empty for the pooled variant
};

// Keyword weights are renormalized over the keywords present in the document.
std::optional<DcTopicEmbedding> dc_topic_embedding(const ContextualEncoding& encoding,
                                                   const TopicKeywords& keywords);

// Pooled document vector standing in for every topic.
DcTopicEmbedding pooled_topic_embedding(const ContextualEncoding& encoding, int topic);

struct ContributingDoc {
  std::string doc_id;
  double weight = 0.0;
};

struct CcTopicEmbedding {
  std::string side;
  int topic = 0;
  Vector vector;
  std::vector<ContributingDoc> contributing_docs;
};

// dc_list is aligned with topic_docs.entries; missing entries are dropped and
// the remaining document weights renormalized.
CcTopicEmbedding cc_topic_embedding(std::span<const std::optional<DcTopicEmbedding>> dc_list,
                                    const TopicDocs& topic_docs);

struct PolarizationScore {
  int topic = 0;
  double beta = 0.0;
  double cosine = 0.0;
};

inline constexpr double kMinNorm = 1e-12;

double cosine_similarity(std::span<const double> a, std::span<const double> b);
PolarizationScore polarization_score(const CcTopicEmbedding& left, const CcTopicEmbedding& right);

struct TopicRanking {
  std::string left;
  std::string right;
  std::string variant;
  std::vector<PolarizationScore> entries;  // beta descending, ties by topic id ascending

  std::vector<int> order() const;
};

TopicRanking rank_topics(std::vector<PolarizationScore> scores, const std::set<int>& exclusions);

enum class VariantMode { PaCTE, NoFinetune, ShuffledLabels, DocEmbedding };

const char* to_string(VariantMode mode);
VariantMode parse_variant(const std::string& text);

// Everything needed to score one topic for one source pair.
struct TopicInputs {
  TopicKeywords keywords;
  TopicDocs left;
  TopicDocs right;
};

// One score per topic following the variant's embedding recipe. Encodings are
// looked up by document id and must cover every listed document.
std::vector<PolarizationScore> run_variant(VariantMode mode, std::span<const TopicInputs> topics,
                                           const std::map<std::string, ContextualEncoding>& encodings);

// {"pair": [l, r], "variant": v, "scores": [{"topic", "cosine", "beta"}], "ranking": [...]}
std::string ranking_to_json(const TopicRanking& ranking);
TopicRanking ranking_from_json(const std::string& text);

}  // namespace pacte
