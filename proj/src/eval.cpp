#include "pacte/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "json.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"

namespace pacte {

using json = nlohmann::json;

namespace {

int check_label(int v, const std::string& where) {
  if (v < -1 || v > 1)
    throw DataError("stance label " + std::to_string(v) + " outside {-1, 0, 1} in " + where);
  return v;
}

}  // namespace

std::vector<int> AnnotationSet::topic_ids() const {
  std::vector<int> ids;
  for (const auto& t : topics) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

AnnotationSet parse_annotations(const std::string& text) {
  AnnotationSet set;
  try {
    const json j = json::parse(text);
    std::set<int> seen;
    for (const auto& t : j.at("topics")) {
      AnnotatedTopic topic;
      topic.id = t.at("id").get<int>();
      if (!seen.insert(topic.id).second)
        throw DataError("annotations list topic " + std::to_string(topic.id) + " twice");
      topic.stance0 = t.value("stance0", std::string());
      topic.stance1 = t.value("stance1", std::string());
      for (const auto& d : t.at("docs")) {
        AnnotatedDoc doc;
        doc.doc_id = d.at("doc_id").get<std::string>();
        doc.source = d.at("source").get<std::string>();
        const std::string where = "topic " + std::to_string(topic.id) + ", doc '" + doc.doc_id + "'";
        for (const auto& l : d.at("labels")) doc.labels.push_back(check_label(l.get<int>(), where));
        if (doc.labels.size() < 3)
          throw DataError("fewer than 3 labels for " + where);
        if (d.contains("resolution") && !d["resolution"].is_null())
          doc.resolution = check_label(d["resolution"].get<int>(), where);
        topic.docs.push_back(std::move(doc));
      }
      set.topics.push_back(std::move(topic));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed annotation file: ") + e.what());
  }
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  try {
    return parse_annotations(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

int majority_vote(std::span<const int> labels, std::optional<int> resolution,
                  const std::string& doc_id) {
  if (labels.size() < 3)
    throw DataError("majority vote needs at least 3 labels" +
                    (doc_id.empty() ? std::string() : " for '" + doc_id + "'"));
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[check_label(l, "'" + doc_id + "'")];
  for (const auto& [value, count] : counts)
    if (2 * count > labels.size()) return value;
  if (!resolution)
    throw DataError("unresolved annotation" +
                    (doc_id.empty() ? std::string() : " for '" + doc_id + "'") +
                    ": no majority label and no resolution label");
  return check_label(*resolution, "'" + doc_id + "'");
}

double leaning(std::span<const int> labels, bool exclude_abstentions) {
  if (labels.empty()) throw DataError("leaning of an empty label list");
  long n1 = 0, n0 = 0, abstain = 0;
  for (int l : labels) {
    if (l == 1) ++n1;
    else if (l == 0) ++n0;
    else ++abstain;
  }
  const long denom = exclude_abstentions ? n1 + n0 : static_cast<long>(labels.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(n1 - n0) / static_cast<double>(denom);
}

std::vector<int> GroundTruth::ranking() const {
  std::vector<int> out;
  for (const auto& t : topics) out.push_back(t.topic);
  return out;
}

std::vector<int> GroundTruth::targets(std::size_t k) const {
  auto r = ranking();
  if (k > r.size())
    throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(r.size()) +
                      " annotated topics");
  r.resize(k);
  return r;
}

GroundTruth gt_polarization_and_ranking(const AnnotationSet& annotations,
                                        const std::set<std::string>& left_sources,
                                        const std::set<std::string>& right_sources,
                                        const std::string& left_label,
                                        const std::string& right_label,
                                        bool exclude_abstentions) {
  GroundTruth gt;
  gt.left = left_label;
  gt.right = right_label;
  for (const auto& topic : annotations.topics) {
    std::vector<int> left, right;
    for (const auto& d : topic.docs) {
      const bool in_left = left_sources.count(d.source) > 0;
      const bool in_right = right_sources.count(d.source) > 0;
      if (!in_left && !in_right) continue;
      const int v = majority_vote(d.labels, d.resolution, d.doc_id);
      if (in_left) left.push_back(v);
      if (in_right) right.push_back(v);
    }
    if (left.empty() || right.empty())
      throw DataError("topic " + std::to_string(topic.id) + " has no annotations for " +
                      (left.empty() ? left_label : right_label));
    TopicTruth t;
    t.topic = topic.id;
    t.le_left = leaning(left, exclude_abstentions);
    t.le_right = leaning(right, exclude_abstentions);
    t.alpha = std::abs(t.le_left - t.le_right) / 2.0;
    gt.topics.push_back(t);
  }
  std::sort(gt.topics.begin(), gt.topics.end(), [](const TopicTruth& a, const TopicTruth& b) {
    if (a.alpha != b.alpha) return a.alpha > b.alpha;
    return a.topic < b.topic;
  });
  return gt;
}

GroundTruth gt_polarization_and_ranking(const AnnotationSet& annotations, const std::string& left,
                                        const std::string& right, bool exclude_abstentions) {
  return gt_polarization_and_ranking(annotations, {left}, {right}, left, right, exclude_abstentions);
}

double recall_at_k(std::span<const int> predicted, const GroundTruth& gt, std::size_t k) {
  const auto labeled = gt.ranking();
  if (k == 0) throw ConfigError("recall@k needs k >= 1");
  const auto targets = gt.targets(k);
  const std::set<int> labeled_set(labeled.begin(), labeled.end());
  std::vector<int> restricted;
  for (int t : predicted)
    if (labeled_set.count(t) &&
        std::find(restricted.begin(), restricted.end(), t) == restricted.end())
      restricted.push_back(t);
  if (restricted.size() != labeled_set.size())
    throw DataError("predicted ranking covers " + std::to_string(restricted.size()) + " of the " +
                    std::to_string(labeled_set.size()) + " annotated topics");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (std::find(targets.begin(), targets.end(), restricted[i]) != targets.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double aggregate_recall(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot average an empty recall table");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

namespace {

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string recall_table_markdown(std::span<const RecallCell> cells, std::size_t k) {
  std::vector<std::string> lefts, rights, methods;
  std::map<std::tuple<std::string, std::string, std::string>, double> value;
  std::map<std::string, std::vector<double>> per_method;
  for (const auto& c : cells) {
    push_unique(lefts, c.left);
    push_unique(rights, c.right);
    push_unique(methods, c.method);
    value[{c.left, c.right, c.method}] = c.recall;
    per_method[c.method].push_back(c.recall);
  }
  std::string out = "|  |";
  for (const auto& r : rights)
    for (const auto& m : methods) out += " " + r + " " + m + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < rights.size() * methods.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& l : lefts) {
    out += "| " + l + " |";
    for (const auto& r : rights)
      for (const auto& m : methods) {
        auto it = value.find({l, r, m});
        out += " " + (it == value.end() ? std::string("-") : fmt(it->second)) + " |";
      }
    out += "\n";
  }
  out += "\nAverage recall@" + std::to_string(k) + ":";
  for (const auto& m : methods) out += " " + m + " " + fmt(aggregate_recall(per_method[m])) + ";";
  out.pop_back();
  out += "\n";
  return out;
}

std::string recall_table_json(std::span<const RecallCell> cells) {
  json j;
  j["cells"] = json::array();
  std::vector<std::string> methods;
  std::map<std::string, std::vector<double>> per_method;
  for (const auto& c : cells) {
    j["cells"].push_back(
        {{"left", c.left}, {"right", c.right}, {"method", c.method}, {"recall", c.recall}});
    push_unique(methods, c.method);
    per_method[c.method].push_back(c.recall);
  }
  j["average"] = json::object();
  for (const auto& m : methods) j["average"][m] = aggregate_recall(per_method[m]);
  return j.dump(2) + "\n";
}

}  // namespace pacte
