#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pacte/corpus.hpp"
#include "pacte/topics.hpp"

namespace pacte {

struct TokenFrequencyVector {
  std::string doc_id;
  std::map<std::string, double> values;  // sums to 1
};

// Relative frequencies of the document's tokens inside vocab.
TokenFrequencyVector token_frequency(const Document& doc, const std::set<std::string>& vocab);
// Relative frequencies over all of the document's tokens.
TokenFrequencyVector token_frequency(const Document& doc);

struct LeaveOutResult {
  int topic = -1;
  double pi = 0.0;
  std::map<std::string, double> per_doc_posteriors;  // each document's own-side posterior
};

// Leave-out partisanship estimate: each document is scored against the mean
// frequency vectors of the other side and of its own side without itself.
LeaveOutResult leave_out_estimator(std::span<const TokenFrequencyVector> left,
                                   std::span<const TokenFrequencyVector> right);

// Applies the estimator to the topic's top-n documents of each side, over the
// union of their tokens.
LeaveOutResult loe_topic(const LdaModel& model, const Corpus& corpus,
                         std::span<const std::size_t> left_indices,
                         std::span<const std::size_t> right_indices, int topic, std::size_t n);

}  // namespace pacte
