#include "pacte/core.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "pacte/error.hpp"

namespace pacte {

using json = nlohmann::json;

std::optional<Vector> dc_keyword_embedding(const ContextualEncoding& enc, const std::string& keyword) {
  Vector sum(enc.dim, 0.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < enc.num_tokens(); ++i) {
    if (enc.tokens[i] != keyword) continue;
    const auto row = enc.row(i);
    for (std::size_t c = 0; c < enc.dim; ++c) sum[c] += row[c];
    ++hits;
  }
  if (hits == 0) return std::nullopt;
  if (hits > 1)
    for (auto& v : sum) v /= static_cast<double>(hits);
  return sum;
}

std::optional<DcTopicEmbedding> dc_topic_embedding(const ContextualEncoding& enc,
                                                   const TopicKeywords& keywords) {
  std::vector<std::pair<const KeywordWeight*, Vector>> present;
  double total = 0.0;
  for (const auto& kw : keywords.entries) {
    if (auto v = dc_keyword_embedding(enc, kw.token)) {
      present.emplace_back(&kw, std::move(*v));
      total += kw.weight;
    }
  }
  if (present.empty()) return std::nullopt;
  if (!(total > 0)) throw NumericError("keyword weights of topic " + std::to_string(keywords.topic) +
                                       " sum to zero in '" + enc.doc_id + "'");
  DcTopicEmbedding out;
  out.doc_id = enc.doc_id;
  out.topic = keywords.topic;
  out.vector.assign(enc.dim, 0.0);
  for (const auto& [kw, v] : present) {
    const double w = kw->weight / total;
    out.used_keywords.push_back({kw->token, w});
    for (std::size_t c = 0; c < enc.dim; ++c) out.vector[c] += w * v[c];
  }
  return out;
}

DcTopicEmbedding pooled_topic_embedding(const ContextualEncoding& enc, int topic) {
  return {enc.doc_id, topic, enc.pooled, {}};
}

CcTopicEmbedding cc_topic_embedding(std::span<const std::optional<DcTopicEmbedding>> dc_list,
                                    const TopicDocs& topic_docs) {
  if (dc_list.size() != topic_docs.entries.size())
    throw DataError("DC embedding list does not align with the topic's documents");
  CcTopicEmbedding out;
  out.side = topic_docs.corpus_label;
  out.topic = topic_docs.topic;
  double total = 0.0;
  for (std::size_t j = 0; j < dc_list.size(); ++j)
    if (dc_list[j]) total += topic_docs.entries[j].weight;
  if (!(total > 0))
    throw DataError("topic " + std::to_string(topic_docs.topic) + " unrepresentable for side " +
                    topic_docs.corpus_label + ": no top document contains its keywords");
  for (std::size_t j = 0; j < dc_list.size(); ++j) {
    if (!dc_list[j]) continue;
    const double w = topic_docs.entries[j].weight / total;
    const auto& v = dc_list[j]->vector;
    if (out.vector.empty()) out.vector.assign(v.size(), 0.0);
    if (v.size() != out.vector.size()) throw DataError("DC embeddings of different dims");
    for (std::size_t c = 0; c < v.size(); ++c) out.vector[c] += w * v[c];
    out.contributing_docs.push_back({topic_docs.entries[j].doc_id, w});
  }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine of vectors with different dims");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kMinNorm || nb < kMinNorm)
    throw NumericError("zero-norm vector: cosine undefined (norms " + std::to_string(na) + ", " +
                       std::to_string(nb) + ")");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

PolarizationScore polarization_score(const CcTopicEmbedding& left, const CcTopicEmbedding& right) {
  if (left.topic != right.topic)
    throw DataError("polarization of different topics (" + std::to_string(left.topic) + " vs " +
                    std::to_string(right.topic) + ")");
  double c;
  try {
    c = cosine_similarity(left.vector, right.vector);
  } catch (const NumericError& e) {
    throw NumericError("topic " + std::to_string(left.topic) + ": " + e.what());
  }
  return {left.topic, 0.5 * (1.0 - c), c};
}

std::vector<int> TopicRanking::order() const {
  std::vector<int> out;
  for (const auto& e : entries) out.push_back(e.topic);
  return out;
}

TopicRanking rank_topics(std::vector<PolarizationScore> scores, const std::set<int>& exclusions) {
  std::erase_if(scores, [&](const PolarizationScore& s) { return exclusions.count(s.topic) > 0; });
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.beta != b.beta) return a.beta > b.beta;
    return a.topic < b.topic;
  });
  TopicRanking r;
  r.entries = std::move(scores);
  return r;
}

const char* to_string(VariantMode mode) {
  switch (mode) {
    case VariantMode::PaCTE: return "PaCTE";
    case VariantMode::NoFinetune: return "NoFinetune";
    case VariantMode::ShuffledLabels: return "ShuffledLabels";
    case VariantMode::DocEmbedding: return "DocEmbedding";
  }
  return "?";
}

VariantMode parse_variant(const std::string& text) {
  for (auto m : {VariantMode::PaCTE, VariantMode::NoFinetune, VariantMode::ShuffledLabels,
                 VariantMode::DocEmbedding})
    if (text == to_string(m)) return m;
  throw ConfigError("unknown variant '" + text +
                    "' (expected PaCTE, NoFinetune, ShuffledLabels or DocEmbedding)");
}

namespace {

CcTopicEmbedding side_embedding(VariantMode mode, const TopicKeywords& keywords,
                                const TopicDocs& docs,
                                const std::map<std::string, ContextualEncoding>& encodings) {
  std::vector<std::optional<DcTopicEmbedding>> dc;
  for (const auto& e : docs.entries) {
    auto it = encodings.find(e.doc_id);
    if (it == encodings.end()) throw DataError("no encoding for document '" + e.doc_id + "'");
    if (mode == VariantMode::DocEmbedding)
      dc.emplace_back(pooled_topic_embedding(it->second, docs.topic));
    else
      dc.push_back(dc_topic_embedding(it->second, keywords));
  }
  return cc_topic_embedding(dc, docs);
}

}  // namespace

std::vector<PolarizationScore> run_variant(VariantMode mode, std::span<const TopicInputs> topics,
                                           const std::map<std::string, ContextualEncoding>& encodings) {
  std::vector<PolarizationScore> scores;
  for (const auto& t : topics) {
    const auto left = side_embedding(mode, t.keywords, t.left, encodings);
    const auto right = side_embedding(mode, t.keywords, t.right, encodings);
    scores.push_back(polarization_score(left, right));
  }
  return scores;
}

std::string ranking_to_json(const TopicRanking& r) {
  json j;
  j["pair"] = {r.left, r.right};
  j["variant"] = r.variant;
  j["scores"] = json::array();
  for (const auto& e : r.entries)
    j["scores"].push_back({{"topic", e.topic}, {"cosine", e.cosine}, {"beta", e.beta}});
  j["ranking"] = r.order();
  return j.dump(2) + "\n";
}

TopicRanking ranking_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TopicRanking r;
    r.left = j.at("pair").at(0).get<std::string>();
    r.right = j.at("pair").at(1).get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    std::map<int, PolarizationScore> by_topic;
    for (const auto& s : j.at("scores")) {
      PolarizationScore p{s.at("topic").get<int>(), s.at("beta").get<double>(),
                          s.at("cosine").get<double>()};
      by_topic[p.topic] = p;
    }
    for (const auto& t : j.at("ranking")) {
      auto it = by_topic.find(t.get<int>());
      if (it == by_topic.end()) throw DataError("ranking lists a topic without a score");
      r.entries.push_back(it->second);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ranking JSON: ") + e.what());
  }
}

}  // namespace pacte
