#include <cmath>
#include <map>

#include "doctest.h"
#include "pacte/error.hpp"
#include "pacte/eval.hpp"
#include "reference_recall.hpp"

using namespace pacte;

namespace {

GroundTruth truth(std::vector<int> ranking) {
  GroundTruth gt;
  for (int t : ranking) gt.topics.push_back({t, 0, 0, 0});
  return gt;
}

const char* kAnnotations = R"({"topics": [
  {"id": 1, "stance0": "against", "stance1": "for", "docs": [
    {"doc_id": "a", "source": "cnn", "labels": [1, 1, 0]},
    {"doc_id": "b", "source": "cnn", "labels": [1, 1, 1]},
    {"doc_id": "c", "source": "fox", "labels": [0, 0, 1]},
    {"doc_id": "d", "source": "fox", "labels": [0, -1, 0]}]},
  {"id": 2, "docs": [
    {"doc_id": "e", "source": "cnn", "labels": [1, 0, -1], "resolution": 1},
    {"doc_id": "f", "source": "cnn", "labels": [-1, -1, -1]},
    {"doc_id": "g", "source": "fox", "labels": [1, 1, 0]},
    {"doc_id": "h", "source": "fox", "labels": [-1, -1, 0]}]}
]})";

}  // namespace

TEST_CASE("majority vote") {
  CHECK(majority_vote(std::vector<int>{1, 1, 0}, std::nullopt) == 1);
  CHECK(majority_vote(std::vector<int>{1, 0, -1}, 0) == 0);
  CHECK_THROWS_WITH_AS(majority_vote(std::vector<int>{1, 0, -1}, std::nullopt, "x"),
                       doctest::Contains("unresolved"), DataError);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{1, 2, 1}, std::nullopt), DataError);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{1, 1}, std::nullopt), DataError);
}

TEST_CASE("leaning") {
  CHECK(leaning(std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}) == 0.0);
  CHECK(leaning(std::vector<int>{1, 1, 1, 1, 1, 1, 1, 1, 1, 1}) == 1.0);
  CHECK(leaning(std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0}) == -1.0);
  CHECK(leaning(std::vector<int>{1, -1, -1, -1}) == 0.25);
  CHECK(leaning(std::vector<int>{1, -1, -1, -1}, true) == 1.0);
  CHECK(leaning(std::vector<int>{-1, -1}, true) == 0.0);
}

TEST_CASE("ground truth from annotations") {
  const auto set = parse_annotations(kAnnotations);
  CHECK(set.topic_ids() == std::vector<int>{1, 2});
  const auto gt = gt_polarization_and_ranking(set, "cnn", "fox");
  REQUIRE(gt.topics.size() == 2);
  CHECK(gt.topics[0].topic == 1);
  CHECK(gt.topics[0].le_left == 1.0);
  CHECK(gt.topics[0].le_right == -1.0);
  CHECK(gt.topics[0].alpha == 1.0);
  CHECK(gt.topics[1].le_left == 0.5);
  CHECK(gt.topics[1].le_right == 0.5);
  CHECK(gt.topics[1].alpha == 0.0);
  const auto swapped = gt_polarization_and_ranking(set, "fox", "cnn");
  for (std::size_t i = 0; i < gt.topics.size(); ++i) {
    CHECK(swapped.topics[i].alpha == gt.topics[i].alpha);
    CHECK(swapped.topics[i].le_left == gt.topics[i].le_right);
  }
  const auto excl = gt_polarization_and_ranking(set, "cnn", "fox", true);
  CHECK(excl.topics[1].le_left == 1.0);
  CHECK_THROWS_AS(gt_polarization_and_ranking(set, "cnn", "nyp"), DataError);
}

TEST_CASE("alpha ties sort by topic id") {
  const auto set = parse_annotations(R"({"topics": [
    {"id": 9, "docs": [{"doc_id": "a", "source": "l", "labels": [1,1,1]},
                       {"doc_id": "b", "source": "r", "labels": [1,1,1]}]},
    {"id": 3, "docs": [{"doc_id": "c", "source": "l", "labels": [0,0,0]},
                       {"doc_id": "d", "source": "r", "labels": [0,0,0]}]}]})");
  CHECK(gt_polarization_and_ranking(set, "l", "r").ranking() == std::vector<int>{3, 9});
}

TEST_CASE("annotation validation") {
  CHECK_THROWS_AS(parse_annotations("{"), DataError);
  CHECK_THROWS_AS(parse_annotations(R"({"topics": [{"id": 1, "docs": [
      {"doc_id": "a", "source": "l", "labels": [1, 3, 1]}]}]})"),
                  DataError);
  CHECK_THROWS_AS(parse_annotations(R"({"topics": [{"id": 1, "docs": [
      {"doc_id": "a", "source": "l", "labels": [1, 1]}]}]})"),
                  DataError);
}

TEST_CASE("recall at k") {
  const auto gt = truth({5, 2, 7, 1, 9});
  CHECK(recall_at_k(std::vector<int>{5, 2, 7, 1, 9}, gt) == 1.0);
  CHECK(recall_at_k(std::vector<int>{1, 9, 5, 2, 7}, gt) == doctest::Approx(1.0 / 3.0));
  // Unlabeled topics are dropped before taking the top k.
  CHECK(recall_at_k(std::vector<int>{100, 101, 1, 9, 2, 5, 7}, gt) == doctest::Approx(1.0 / 3.0));
  CHECK(recall_at_k(std::vector<int>{1, 9, 0, 5, 2, 7}, gt, 2) == 0.0);
  CHECK_THROWS_AS(recall_at_k(std::vector<int>{5, 2, 7}, gt), DataError);
  CHECK_THROWS_AS(recall_at_k(std::vector<int>{5, 2, 7, 1, 9}, gt, 6), ConfigError);
  CHECK_THROWS_AS(aggregate_recall(std::vector<double>{}), DataError);
}

TEST_CASE("reference recall grid averages") {
  const auto cells = fixture::reference_recall_cells();
  std::map<std::string, std::vector<double>> per;
  for (const auto& c : cells) per[c.method].push_back(c.recall);
  CHECK(std::abs(aggregate_recall(per["PaCTE"]) - 14.0 / 27.0) < 1e-12);
  CHECK(std::abs(aggregate_recall(per["LOE"]) - 7.0 / 27.0) < 1e-12);
  CHECK(std::abs(aggregate_recall(per["PLS"]) - 7.0 / 27.0) < 1e-12);
  const std::string md = recall_table_markdown(cells);
  CHECK(md.find("PaCTE 0.519") != std::string::npos);
  CHECK(md.find("LOE 0.259") != std::string::npos);
  const std::string js = recall_table_json(cells);
  CHECK(js.find("\"average\"") != std::string::npos);
}

TEST_CASE("recall table labels the configured k") {
  const std::vector<RecallCell> cells = {{"a", "b", "PaCTE", 1.0}};
  CHECK(recall_table_markdown(cells, 1).find("Average recall@1: PaCTE 1.000") != std::string::npos);
}
