#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pacte/error.hpp"
#include "pacte/pipeline.hpp"

namespace {

using pacte::PipelineConfig;

// Command-line values applied on top of the config file.
struct Overrides {
  std::string config;
  std::vector<std::function<void(PipelineConfig&)>> apply;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> pending;

  template <typename T, typename F>
  void add(CLI::App* app, const std::string& name, const std::string& help, F setter) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    pending.emplace_back(opt, [value, setter](PipelineConfig& c) { setter(c, *value); });
  }

  void collect() {
    for (auto& [opt, fn] : pending)
      if (opt->count() > 0) apply.push_back(fn);
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "pipeline config file (JSON)");
  o.add<std::string>(app, "--corpus", "corpus JSONL (id, source, date, text)",
                     [](PipelineConfig& c, const std::string& v) { c.corpus = v; });
  o.add<std::string>(app, "--sources", "source-to-side map file",
                     [](PipelineConfig& c, const std::string& v) { c.sources = pacte::load_source_map(v); });
  o.add<std::vector<std::string>>(
      app, "--source", "SOURCE=SIDE entry of the source map (repeatable)",
      [](PipelineConfig& c, const std::vector<std::string>& v) {
        for (const auto& e : v) {
          const auto eq = e.find('=');
          if (eq == std::string::npos) throw pacte::ConfigError("--source expects SOURCE=SIDE, got '" + e + "'");
          c.sources[e.substr(0, eq)] = pacte::parse_side(e.substr(eq + 1));
        }
      });
  o.add<std::string>(app, "--stopwords", "stopword list file",
                     [](PipelineConfig& c, const std::string& v) { c.stopwords = v; });
  o.add<std::string>(app, "--lemmas", "token-to-lemma map file",
                     [](PipelineConfig& c, const std::string& v) { c.lemmas = v; });
  o.add<std::string>(app, "--annotations", "annotation file (JSON)",
                     [](PipelineConfig& c, const std::string& v) { c.annotations = v; });
  o.add<std::string>(app, "--embedding-store", "external embedding store (index.json or directory)",
                     [](PipelineConfig& c, const std::string& v) { c.embedding_store = v; });
  o.add<std::string>(app, "--workdir", "artifact directory",
                     [](PipelineConfig& c, const std::string& v) { c.workdir = v; });
  o.add<int>(app, "--bigram-min-count", "bigram minimum pair count",
             [](PipelineConfig& c, int v) { c.bigram_min_count = v; });
  o.add<double>(app, "--bigram-threshold", "bigram score threshold",
                [](PipelineConfig& c, double v) { c.bigram_threshold = v; });
  o.add<std::size_t>(app, "--min-df", "minimum document frequency",
                     [](PipelineConfig& c, std::size_t v) { c.min_df = v; });
  o.add<double>(app, "--max-df", "maximum document frequency fraction",
                [](PipelineConfig& c, double v) { c.max_df_fraction = v; });
  o.add<int>(app, "--k", "number of topics", [](PipelineConfig& c, int v) {
    c.lda.num_topics = v;
    c.k_min = c.k_max = 0;
  });
  o.add<int>(app, "--k-min", "smallest K of the coherence grid", [](PipelineConfig& c, int v) { c.k_min = v; });
  o.add<int>(app, "--k-max", "largest K of the coherence grid", [](PipelineConfig& c, int v) { c.k_max = v; });
  o.add<double>(app, "--alpha", "LDA document-topic prior (default 50/K)",
                [](PipelineConfig& c, double v) { c.lda.alpha = v; });
  o.add<double>(app, "--beta", "LDA topic-word prior", [](PipelineConfig& c, double v) { c.lda.beta = v; });
  o.add<int>(app, "--iterations", "Gibbs sweeps", [](PipelineConfig& c, int v) { c.lda.iterations = v; });
  o.add<std::uint64_t>(app, "--seed", "LDA seed", [](PipelineConfig& c, std::uint64_t v) { c.lda.seed = v; });
  o.add<std::vector<int>>(app, "--exclude-topic", "topic id left out of rankings (repeatable)",
                          [](PipelineConfig& c, const std::vector<int>& v) {
                            c.excluded_topics.insert(v.begin(), v.end());
                          });
  o.add<std::size_t>(app, "--m", "keywords per topic", [](PipelineConfig& c, std::size_t v) { c.m = v; });
  o.add<std::size_t>(app, "--n", "documents per topic and side", [](PipelineConfig& c, std::size_t v) { c.n = v; });
  o.add<int>(app, "--d-model", "encoder width", [](PipelineConfig& c, int v) { c.encoder.d_model = v; });
  o.add<int>(app, "--n-heads", "attention heads", [](PipelineConfig& c, int v) { c.encoder.n_heads = v; });
  o.add<int>(app, "--n-layers", "encoder layers", [](PipelineConfig& c, int v) { c.encoder.n_layers = v; });
  o.add<int>(app, "--ffn-dim", "feed-forward width", [](PipelineConfig& c, int v) { c.encoder.ffn_dim = v; });
  o.add<int>(app, "--max-len", "positions per document including the pooled one",
             [](PipelineConfig& c, int v) { c.encoder.max_len = v; });
  o.add<std::uint64_t>(app, "--encoder-seed", "encoder initialization seed",
                       [](PipelineConfig& c, std::uint64_t v) { c.encoder_seed = v; });
  o.add<double>(app, "--lr", "learning rate", [](PipelineConfig& c, double v) { c.train.learning_rate = v; });
  o.add<double>(app, "--weight-decay", "decoupled weight decay",
                [](PipelineConfig& c, double v) { c.train.weight_decay = v; });
  o.add<std::size_t>(app, "--batch-size", "training batch size",
                     [](PipelineConfig& c, std::size_t v) { c.train.batch_size = v; });
  o.add<int>(app, "--epochs", "training epochs", [](PipelineConfig& c, int v) { c.train.epochs = v; });
  o.add<std::uint64_t>(app, "--train-seed", "batch order and label shuffling seed",
                       [](PipelineConfig& c, std::uint64_t v) { c.train.seed = v; });
  o.add<std::vector<std::string>>(app, "--variant",
                                  "PaCTE, NoFinetune, ShuffledLabels or DocEmbedding (repeatable)",
                                  [](PipelineConfig& c, const std::vector<std::string>& v) {
                                    c.variants.clear();
                                    for (const auto& s : v) c.variants.push_back(pacte::parse_variant(s));
                                  });
  o.add<std::vector<std::string>>(app, "--pair", "LEFT:RIGHT source pair (repeatable)",
                                  [](PipelineConfig& c, const std::vector<std::string>& v) {
                                    c.pairs.clear();
                                    for (const auto& s : v) {
                                      const auto colon = s.find(':');
                                      if (colon == std::string::npos)
                                        throw pacte::ConfigError("--pair expects LEFT:RIGHT, got '" + s + "'");
                                      c.pairs.push_back({s.substr(0, colon), s.substr(colon + 1)});
                                    }
                                  });
  auto no_loe = std::make_shared<bool>(false);
  o.pending.emplace_back(app->add_flag("--no-loe", *no_loe, "skip the leave-out baseline"),
                         [](PipelineConfig& c) { c.run_loe = false; });
  auto excl = std::make_shared<bool>(false);
  o.pending.emplace_back(
      app->add_flag("--exclude-abstentions", *excl, "leave -1 labels out of the leaning denominator"),
      [](PipelineConfig& c) { c.exclude_abstentions = true; });
}

PipelineConfig build_config(Overrides& o) {
  o.collect();
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : pacte::load_pipeline_config(o.config);
  if (const char* env = std::getenv("PACTE_WORKDIR"); env && *env) c.workdir = env;
  for (auto& fn : o.apply) fn(c);
  return c;
}

void print(const std::vector<pacte::StageReport>& reports) {
  for (const auto& r : reports)
    std::cout << r.stage << ": "
              << (r.status == pacte::StageStatus::Cached ? "cached" : "computed") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partisanship-aware contextualized topic embeddings: polarized topic ranking"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    Overrides overrides;
    std::function<std::vector<pacte::StageReport>(pacte::Pipeline&)> run;
  };
  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help,
                 std::function<std::vector<pacte::StageReport>(pacte::Pipeline&)> run) {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, help);
    add_common(cmd->app, cmd->overrides);
    cmd->run = std::move(run);
    commands.push_back(std::move(cmd));
    return commands.back().get();
  };

  std::string export_path;
  Command* pre = add("preprocess", "tokenize, merge bigrams and build the vocabulary",
                     [&](pacte::Pipeline& p) {
                       std::vector<pacte::StageReport> r{p.preprocess()};
                       if (!export_path.empty()) p.export_tokens(export_path);
                       return r;
                     });
  pre->app->add_option("--export-tokens", export_path, "also write {id, side, tokens} JSONL here");
  add("lda", "train the topic model with a fixed K",
      [](pacte::Pipeline& p) { return std::vector<pacte::StageReport>{p.lda()}; });
  add("select-k", "train one topic model per K of the grid and keep the most coherent",
      [](pacte::Pipeline& p) {
        if (p.config().k_min <= 0) throw pacte::ConfigError("select-k needs --k-min and --k-max (or lda.k_grid)");
        return std::vector<pacte::StageReport>{p.lda()};
      });
  add("train", "split by topicality and train the partisanship encoder(s)", [](pacte::Pipeline& p) {
    std::vector<pacte::StageReport> r;
    const auto modes = p.encoder_modes();
    if (std::any_of(modes.begin(), modes.end(), [](const std::string& m) {
          return m == "true_labels" || m == "shuffled_labels";
        })) {
      r.push_back(p.split());
      auto t = p.train();
      r.insert(r.end(), t.begin(), t.end());
    } else {
      std::cerr << "train: no configured variant needs training\n";
    }
    return r;
  });
  add("embed", "encode the top documents of every topic",
      [](pacte::Pipeline& p) { return p.embed(); });
  add("rank", "score and rank topics for every pair and variant",
      [](pacte::Pipeline& p) { return p.rank(); });
  add("loe", "leave-out estimator baseline",
      [](pacte::Pipeline& p) { return std::vector<pacte::StageReport>{p.loe()}; });
  add("eval", "recall against annotated ground truth", [](pacte::Pipeline& p) {
    auto r = p.eval();
    if (!r) throw pacte::ConfigError("eval needs an annotation file (--annotations)");
    return std::vector<pacte::StageReport>{*r};
  });
  add("report", "write report.md, report.json and pca.csv",
      [](pacte::Pipeline& p) { return std::vector<pacte::StageReport>{p.report()}; });
  add("pipeline", "run every stage, reusing current cached outputs",
      [](pacte::Pipeline& p) { return p.run_all(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      pacte::Pipeline pipeline(build_config(cmd->overrides), &std::cerr);
      print(cmd->run(pipeline));
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
