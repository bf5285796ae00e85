#include <cstdio>

#include "json.hpp"
#include "pacte/io.hpp"
#include "pacte/pca.hpp"
#include "pacte/pipeline.hpp"

namespace pacte {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v, const char* format = "%.4f") {
  char buf[40];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

StageReport Pipeline::report() {
  for (auto v : config_.variants) require(std::string("rank_") + to_string(v), "rank");
  if (config_.run_loe) require("loe", "loe");
  const bool annotated = !config_.annotations.empty();
  if (annotated) require("eval", "eval");

  return run_stage("report", [&](const fs::path& dir) {
    const auto pairs = config_.effective_pairs();
    json report;
    report["pairs"] = json::array();
    for (const auto& p : pairs) report["pairs"].push_back({p.left, p.right});
    report["variants"] = json::array();
    for (auto v : config_.variants) report["variants"].push_back(to_string(v));
    report["num_topics"] = model().num_topics;
    report["excluded_topics"] = config_.excluded_topics;

    std::map<int, std::vector<KeywordWeight>> keywords;
    report["topics"] = json::array();
    for (int t : included_topics()) {
      keywords[t] = top_keywords(model(), vocabulary(), t, std::min(config_.m, vocabulary().size())).entries;
      json kw = json::array();
      for (const auto& e : keywords[t]) kw.push_back({e.token, e.weight});
      report["topics"].push_back({{"topic", t}, {"keywords", kw}});
    }

    std::vector<std::pair<std::string, fs::path>> methods;
    for (auto v : config_.variants)
      methods.emplace_back(to_string(v), stage_dir(std::string("rank_") + to_string(v)));
    if (config_.run_loe) methods.emplace_back("LOE", stage_dir("loe"));

    std::string md = "# Polarized topic report\n\n";
    md += "Topics: " + std::to_string(model().num_topics) + " (" +
          std::to_string(included_topics().size()) + " ranked)\n\n";
    if (!annotated) md += "No annotations supplied; the recall section is omitted.\n\n";

    report["rankings"] = json::array();
    for (const auto& pair : pairs) {
      md += "## " + pair.left + " vs " + pair.right + "\n\n";
      for (const auto& [name, mdir] : methods) {
        const std::string text = io::read_file(mdir / (pair.label() + ".json"));
        report["rankings"].push_back(json::parse(text));
        const TopicRanking ranking = ranking_from_json(text);
        md += "### " + name + "\n\n";
        md += name == "LOE" ? "| rank | topic | pi | keywords |\n|---|---|---|---|\n"
                            : "| rank | topic | beta | cosine | keywords |\n|---|---|---|---|---|\n";
        for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
          const auto& e = ranking.entries[i];
          std::string kw;
          const auto& entries = keywords[e.topic];
          for (std::size_t k = 0; k < entries.size() && k < 5; ++k)
            kw += (k ? ", " : "") + entries[k].token;
          md += "| " + std::to_string(i + 1) + " | " + std::to_string(e.topic) + " | " + num(e.beta);
          if (name != "LOE") md += " | " + num(e.cosine);
          md += " | " + kw + " |\n";
        }
        md += "\n";
      }
    }

    if (annotated) {
      report["recall"] = json::parse(io::read_file(stage_dir("eval") / "eval.json"));
      md += "## Recall@" + std::to_string(config_.recall_k) + "\n\n";
      md += io::read_file(stage_dir("eval") / "eval.md") + "\n";
    } else {
      report["recall"] = nullptr;
    }

    // Projection of the DC topic embeddings and pooled vectors of the first
    // variant's encoder.
    const std::string mode = encoder_mode_for(config_.variants.front(), !config_.embedding_store.empty());
    const auto ids = docs_to_embed();
    const auto encodings = encodings_for(mode, ids);
    struct Row {
      std::string doc_id;
      int topic;
      std::string side;
      Vector vector;
    };
    std::vector<Row> rows;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& pair : pairs)
      for (const auto& t : topic_inputs(pair))
        for (const auto* docs : {&t.left, &t.right})
          for (const auto& e : docs->entries) {
            if (!seen.insert({e.doc_id, t.keywords.topic}).second) continue;
            if (auto dc = dc_topic_embedding(encodings.at(e.doc_id), t.keywords))
              rows.push_back({e.doc_id, t.keywords.topic, to_string(corpus()[e.doc].side), dc->vector});
          }
    for (const auto& id : ids)
      rows.push_back({id, -1, to_string(corpus()[*corpus().find(id)].side), encodings.at(id).pooled});
    std::string csv = "doc_id,topic_id,side,x,y\n";
    std::vector<Vector> vectors;
    for (const auto& r : rows) vectors.push_back(r.vector);
    if (vectors.size() >= 2 && vectors.front().size() >= 2) {
      const auto proj = pca_project(vectors, 2);
      for (std::size_t i = 0; i < rows.size(); ++i)
        csv += csv_field(rows[i].doc_id) + "," + std::to_string(rows[i].topic) + "," + rows[i].side + "," +
               num(proj[i][0], "%.17g") + "," + num(proj[i][1], "%.17g") + "\n";
    } else {
      md += "Too few embeddings for a 2-d projection; pca.csv holds the header only.\n";
    }

    io::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
    io::write_file_atomic(dir / "report.md", md);
    io::write_file_atomic(dir / "pca.csv", csv);
  });
}

}  // namespace pacte
