#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pacte {

// Stance labels: -1 no clear stance, 0 stance A, 1 stance B.
struct AnnotatedDoc {
  std::string doc_id;
  std::string source;
  std::vector<int> labels;
  std::optional<int> resolution;
};

struct AnnotatedTopic {
  int id = 0;
  std::string stance0;
  std::string stance1;
  std::vector<AnnotatedDoc> docs;
};

struct AnnotationSet {
  std::vector<AnnotatedTopic> topics;

  std::vector<int> topic_ids() const;
};

AnnotationSet parse_annotations(const std::string& json_text);
AnnotationSet load_annotations(const std::filesystem::path& path);

// Strict majority of the labels; without one the resolution label decides.
int majority_vote(std::span<const int> labels, std::optional<int> resolution,
                  const std::string& doc_id = "");

// (N(1) - N(0)) / |D|; abstentions (-1) count in |D| unless excluded.
double leaning(std::span<const int> final_labels, bool exclude_abstentions = false);

struct TopicTruth {
  int topic = 0;
  double le_left = 0.0;
  double le_right = 0.0;
  double alpha = 0.0;
};

struct GroundTruth {
  std::string left;
  std::string right;
  std::vector<TopicTruth> topics;  // alpha descending, ties by topic id ascending

  std::vector<int> ranking() const;
  std::vector<int> targets(std::size_t k = 3) const;
};

// Each side is a set of source names whose annotated documents are pooled.
GroundTruth gt_polarization_and_ranking(const AnnotationSet& annotations,
                                        const std::set<std::string>& left_sources,
                                        const std::set<std::string>& right_sources,
                                        const std::string& left_label,
                                        const std::string& right_label,
                                        bool exclude_abstentions = false);
GroundTruth gt_polarization_and_ranking(const AnnotationSet& annotations, const std::string& left,
                                        const std::string& right, bool exclude_abstentions = false);

// Fraction of the ground-truth top-k found in the predicted top-k after the
// prediction is restricted to annotated topics.
double recall_at_k(std::span<const int> predicted, const GroundTruth& gt, std::size_t k = 3);

double aggregate_recall(std::span<const double> values);

struct RecallCell {
  std::string left;
  std::string right;
  std::string method;
  double recall = 0.0;
};

// Rows are left sources, column groups are right sources with one column per
// method, followed by a per-method average line.
std::string recall_table_markdown(std::span<const RecallCell> cells, std::size_t k = 3);
std::string recall_table_json(std::span<const RecallCell> cells);

}  // namespace pacte
