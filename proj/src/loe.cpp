#include "pacte/loe.hpp"

#include <unordered_map>

#include "pacte/error.hpp"

namespace pacte {

TokenFrequencyVector token_frequency(const Document& doc, const std::set<std::string>& vocab) {
  TokenFrequencyVector out;
  out.doc_id = doc.id;
  std::size_t total = 0;
  for (const auto& t : doc.tokens) {
    if (!vocab.count(t)) continue;
    out.values[t] += 1.0;
    ++total;
  }
  if (total == 0) throw DataError("document '" + doc.id + "' has no tokens in the vocabulary");
  for (auto& [t, v] : out.values) v /= static_cast<double>(total);
  return out;
}

TokenFrequencyVector token_frequency(const Document& doc) {
  return token_frequency(doc, std::set<std::string>(doc.tokens.begin(), doc.tokens.end()));
}

namespace {

using Dense = std::vector<double>;

// Running mean over the given rows, skipping `skip`. Identical rows average to
// themselves exactly.
Dense mean_without(const std::vector<Dense>& rows, std::size_t skip) {
  Dense m(rows.front().size(), 0.0);
  double k = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r == skip) continue;
    k += 1.0;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += (rows[r][i] - m[i]) / k;
  }
  return m;
}

// Mean over documents of the frequency-weighted own-side posterior.
double side_term(const std::vector<Dense>& own, const std::vector<Dense>& other,
                 std::span<const TokenFrequencyVector> docs, LeaveOutResult& result) {
  const Dense other_mean = mean_without(other, other.size());
  double sum = 0.0;
  for (std::size_t d = 0; d < own.size(); ++d) {
    const Dense own_mean = mean_without(own, d);
    double num = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < own_mean.size(); ++i) {
      if (own[d][i] == 0.0) continue;
      const double denom = own_mean[i] + other_mean[i];
      const double post = denom > 0.0 ? own_mean[i] / denom : 0.5;
      num += own[d][i] * post;
      mass += own[d][i];
    }
    const double value = num / mass;
    result.per_doc_posteriors[docs[d].doc_id] = value;
    sum += value;
  }
  return sum / static_cast<double>(own.size());
}

}  // namespace

LeaveOutResult leave_out_estimator(std::span<const TokenFrequencyVector> left,
                                   std::span<const TokenFrequencyVector> right) {
  if (left.size() < 2 || right.size() < 2)
    throw DataError("leave-out estimator needs at least 2 documents per side (got " +
                    std::to_string(left.size()) + " and " + std::to_string(right.size()) + ")");
  std::map<std::string, std::size_t> index;
  for (auto side : {left, right})
    for (const auto& d : side)
      for (const auto& [t, v] : d.values) index.emplace(t, 0);
  std::size_t next = 0;
  for (auto& [t, i] : index) i = next++;
  auto densify = [&](std::span<const TokenFrequencyVector> docs) {
    std::vector<Dense> out;
    for (const auto& d : docs) {
      Dense row(index.size(), 0.0);
      double mass = 0.0;
      for (const auto& [t, v] : d.values) {
        if (v < 0) throw DataError("negative frequency in '" + d.doc_id + "'");
        row[index.at(t)] = v;
        mass += v;
      }
      if (!(mass > 0)) throw DataError("empty frequency vector for '" + d.doc_id + "'");
      out.push_back(std::move(row));
    }
    return out;
  };
  const auto L = densify(left);
  const auto R = densify(right);
  LeaveOutResult result;
  const double term_left = side_term(L, R, left, result);
  const double term_right = side_term(R, L, right, result);
  result.pi = 0.5 * (term_left + term_right);
  return result;
}

LeaveOutResult loe_topic(const LdaModel& model, const Corpus& corpus,
                         std::span<const std::size_t> left_indices,
                         std::span<const std::size_t> right_indices, int topic, std::size_t n) {
  const auto left_docs = top_documents(model, corpus, left_indices, topic, n, "left");
  const auto right_docs = top_documents(model, corpus, right_indices, topic, n, "right");
  std::set<std::string> vocab;
  for (const auto* docs : {&left_docs, &right_docs})
    for (const auto& e : docs->entries)
      vocab.insert(corpus[e.doc].tokens.begin(), corpus[e.doc].tokens.end());
  std::vector<TokenFrequencyVector> l, r;
  for (const auto& e : left_docs.entries) l.push_back(token_frequency(corpus[e.doc], vocab));
  for (const auto& e : right_docs.entries) r.push_back(token_frequency(corpus[e.doc], vocab));
  auto result = leave_out_estimator(l, r);
  result.topic = topic;
  return result;
}

}  // namespace pacte
