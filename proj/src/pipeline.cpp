#include "pacte/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "json.hpp"
#include "pacte/embedding_store.hpp"
#include "pacte/eval.hpp"
#include "pacte/io.hpp"
#include "pacte/loe.hpp"

namespace pacte {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Bumped whenever a stage's output format or algorithm changes.
constexpr int kStageVersion = 1;

const char* kAggregateSides[] = {"Liberal", "Conservative"};

json pair_json(const std::vector<PairSpec>& pairs) {
  json j = json::array();
  for (const auto& p : pairs) j.push_back({p.left, p.right});
  return j;
}

template <typename T>
T take(json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  T v = obj.at(key).get<T>();
  obj.erase(key);
  return v;
}

void reject_unknown(const json& obj, const std::string& where) {
  if (!obj.empty())
    throw ConfigError("unknown key '" + obj.begin().key() + "' in " + where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::string PairSpec::label() const { return sanitize_name(left) + "__" + sanitize_name(right); }

std::string sanitize_name(const std::string& name) {
  std::string out;
  for (unsigned char c : name)
    out += (std::isalnum(c) || c == '-' || c == '.') ? static_cast<char>(c) : '_';
  return out;
}

void PipelineConfig::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (n < 1) throw ConfigError("n must be at least 1");
  if (k_min > 0) {
    if (k_min < 2 || k_max < k_min) throw ConfigError("K grid must satisfy 2 <= k_min <= k_max");
  } else if (lda.num_topics < 1) {
    throw ConfigError("number of topics must be positive");
  }
  if (lda.iterations < 1) throw ConfigError("LDA iterations must be at least 1");
  if (!(lda.beta > 0)) throw ConfigError("LDA beta must be positive");
  if (variants.empty()) throw ConfigError("at least one variant is required");
  if (!(topicality_threshold > 0 && topicality_threshold < 1))
    throw ConfigError("topicality threshold must lie in (0, 1)");
  if (bigram_min_count < 1) throw ConfigError("bigram min_count must be at least 1");
  if (recall_k < 1) throw ConfigError("recall k must be at least 1");
  encoder.validate();
}

std::vector<PairSpec> PipelineConfig::effective_pairs() const {
  if (pairs.empty()) return {{"Liberal", "Conservative"}};
  return pairs;
}

PipelineConfig parse_pipeline_config(const std::string& text, const fs::path& base) {
  PipelineConfig c;
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    c.corpus = resolve(base, take<std::string>(j, "corpus", ""));
    c.stopwords = resolve(base, take<std::string>(j, "stopwords", ""));
    c.lemmas = resolve(base, take<std::string>(j, "lemmas", ""));
    c.annotations = resolve(base, take<std::string>(j, "annotations", ""));
    c.embedding_store = resolve(base, take<std::string>(j, "embedding_store", ""));
    if (j.contains("workdir")) c.workdir = resolve(base, take<std::string>(j, "workdir", ""));
    if (j.contains("source_map"))
      c.sources = load_source_map(resolve(base, take<std::string>(j, "source_map", "")));
    if (j.contains("sources")) {
      for (const auto& [k, v] : j.at("sources").items()) c.sources[k] = parse_side(v.get<std::string>());
      j.erase("sources");
    }
    c.extra_stopwords = take(j, "extra_stopwords", c.extra_stopwords);
    if (j.contains("bigram")) {
      json b = j.at("bigram");
      c.bigram_min_count = take(b, "min_count", c.bigram_min_count);
      c.bigram_threshold = take(b, "threshold", c.bigram_threshold);
      reject_unknown(b, "bigram");
      j.erase("bigram");
    }
    if (j.contains("vocabulary")) {
      json v = j.at("vocabulary");
      c.min_df = take(v, "min_df", c.min_df);
      c.max_df_fraction = take(v, "max_df_fraction", c.max_df_fraction);
      reject_unknown(v, "vocabulary");
      j.erase("vocabulary");
    }
    if (j.contains("lda")) {
      json l = j.at("lda");
      c.lda.num_topics = take(l, "k", c.lda.num_topics);
      if (l.contains("k_grid")) {
        const auto grid = l.at("k_grid").get<std::vector<int>>();
        if (grid.size() != 2) throw ConfigError("lda.k_grid must be [k_min, k_max]");
        c.k_min = grid[0];
        c.k_max = grid[1];
        l.erase("k_grid");
      }
      c.lda.alpha = take(l, "alpha", c.lda.alpha);
      c.lda.beta = take(l, "beta", c.lda.beta);
      c.lda.iterations = take(l, "iterations", c.lda.iterations);
      c.lda.seed = take(l, "seed", c.lda.seed);
      const auto excl = take(l, "exclude_topics", std::vector<int>{});
      c.excluded_topics.insert(excl.begin(), excl.end());
      reject_unknown(l, "lda");
      j.erase("lda");
    }
    c.m = take(j, "m", c.m);
    c.n = take(j, "n", c.n);
    if (j.contains("encoder")) {
      json e = j.at("encoder");
      c.encoder.d_model = take(e, "d_model", c.encoder.d_model);
      c.encoder.n_heads = take(e, "n_heads", c.encoder.n_heads);
      c.encoder.n_layers = take(e, "n_layers", c.encoder.n_layers);
      c.encoder.ffn_dim = take(e, "ffn_dim", c.encoder.ffn_dim);
      c.encoder.max_len = take(e, "max_len", c.encoder.max_len);
      c.encoder_seed = take(e, "seed", c.encoder_seed);
      reject_unknown(e, "encoder");
      j.erase("encoder");
    }
    if (j.contains("train")) {
      json t = j.at("train");
      c.train.learning_rate = take(t, "learning_rate", c.train.learning_rate);
      c.train.weight_decay = take(t, "weight_decay", c.train.weight_decay);
      c.train.batch_size = take(t, "batch_size", c.train.batch_size);
      c.train.epochs = take(t, "epochs", c.train.epochs);
      c.train.seed = take(t, "seed", c.train.seed);
      c.topicality_threshold = take(t, "topicality_threshold", c.topicality_threshold);
      reject_unknown(t, "train");
      j.erase("train");
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) c.variants.push_back(parse_variant(v.get<std::string>()));
      j.erase("variants");
    }
    c.run_loe = take(j, "loe", c.run_loe);
    if (j.contains("pairs")) {
      for (const auto& p : j.at("pairs")) {
        const auto v = p.get<std::vector<std::string>>();
        if (v.size() != 2) throw ConfigError("each pair must be [left, right]");
        c.pairs.push_back({v[0], v[1]});
      }
      j.erase("pairs");
    }
    if (j.contains("eval")) {
      json e = j.at("eval");
      c.exclude_abstentions = take(e, "exclude_abstentions", c.exclude_abstentions);
      c.recall_k = take(e, "k", c.recall_k);
      reject_unknown(e, "eval");
      j.erase("eval");
    }
    reject_unknown(j, "pipeline config");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return parse_pipeline_config(io::read_file(path), path.parent_path());
}

Pipeline::Pipeline(PipelineConfig config, std::ostream* log)
    : config_(std::move(config)), log_(log) {
  config_.validate();
}

std::string Pipeline::encoder_mode_for(VariantMode mode, bool external_store) {
  if (external_store) return "store";
  switch (mode) {
    case VariantMode::PaCTE:
    case VariantMode::DocEmbedding: return "true_labels";
    case VariantMode::ShuffledLabels: return "shuffled_labels";
    case VariantMode::NoFinetune: return "none";
  }
  return "none";
}

std::vector<std::string> Pipeline::encoder_modes() const {
  std::vector<std::string> out;
  for (const char* m : {"true_labels", "shuffled_labels", "none", "store"})
    for (auto v : config_.variants)
      if (encoder_mode_for(v, !config_.embedding_store.empty()) == m) {
        out.push_back(m);
        break;
      }
  return out;
}

fs::path Pipeline::store_index() const {
  const fs::path& p = config_.embedding_store;
  return fs::is_directory(p) ? p / "index.json" : p;
}

std::string Pipeline::file_hash(const fs::path& path) {
  if (path.empty()) return "";
  return io::sha256_hex(io::read_file(path));
}

std::string Pipeline::key(const std::string& stage) {
  auto it = keys_.find(stage);
  if (it != keys_.end()) return it->second;
  const std::string k = compute_key(stage);
  keys_[stage] = k;
  return k;
}

std::string Pipeline::compute_key(const std::string& stage) {
  const auto& c = config_;
  json j;
  j["stage"] = stage;
  j["version"] = kStageVersion;
  if (stage == "preprocess") {
    if (c.corpus.empty()) throw ConfigError("no corpus configured");
    j["corpus"] = file_hash(c.corpus);
    json src = json::object();
    for (const auto& [s, side] : c.sources) src[s] = to_string(side);
    j["sources"] = src;
    j["stopwords"] = file_hash(c.stopwords);
    j["lemmas"] = file_hash(c.lemmas);
    j["extra_stopwords"] = c.extra_stopwords;
    j["bigram"] = {c.bigram_min_count, c.bigram_threshold};
    j["vocabulary"] = {c.min_df, c.max_df_fraction};
  } else if (stage == "lda") {
    j["upstream"] = key("preprocess");
    j["k"] = c.k_min > 0 ? json{c.k_min, c.k_max} : json(c.lda.num_topics);
    j["alpha"] = c.lda.alpha;
    j["beta"] = c.lda.beta;
    j["iterations"] = c.lda.iterations;
    j["seed"] = c.lda.seed;
    j["m"] = c.m;
  } else if (stage == "split") {
    j["upstream"] = key("lda");
    j["threshold"] = c.topicality_threshold;
  } else if (stage.rfind("train_", 0) == 0) {
    j["upstream"] = key("split");
    j["encoder"] = {c.encoder.d_model, c.encoder.n_heads, c.encoder.n_layers, c.encoder.ffn_dim,
                    c.encoder.max_len, c.encoder_seed};
    j["train"] = {c.train.learning_rate, c.train.weight_decay, c.train.batch_size, c.train.epochs,
                  c.train.seed};
  } else if (stage.rfind("embed_", 0) == 0) {
    const std::string mode = stage.substr(6);
    if (mode == "none") {
      j["upstream"] = key("preprocess");
      j["encoder"] = {c.encoder.d_model, c.encoder.n_heads, c.encoder.n_layers, c.encoder.ffn_dim,
                      c.encoder.max_len, c.encoder_seed};
    } else {
      j["upstream"] = key("train_" + mode);
    }
    j["lda"] = key("lda");
    j["pairs"] = pair_json(c.effective_pairs());
    j["n"] = c.n;
    j["excluded"] = c.excluded_topics;
  } else if (stage.rfind("rank_", 0) == 0) {
    const VariantMode v = parse_variant(stage.substr(5));
    const std::string mode = encoder_mode_for(v, !c.embedding_store.empty());
    if (mode == "store") {
      io::Sha256 h;
      const fs::path index = store_index();
      h.update(io::read_file(index));
      for (const auto& e : EmbeddingStore::open(index).entries())
        h.update(io::read_file(index.parent_path() / e.file));
      j["store"] = h.hex_digest();
    } else {
      j["embed"] = key("embed_" + mode);
    }
    j["lda"] = key("lda");
    j["pairs"] = pair_json(c.effective_pairs());
    j["m"] = c.m;
    j["n"] = c.n;
    j["excluded"] = c.excluded_topics;
  } else if (stage == "loe") {
    j["lda"] = key("lda");
    j["pairs"] = pair_json(c.effective_pairs());
    j["n"] = c.n;
    j["excluded"] = c.excluded_topics;
  } else if (stage == "eval") {
    for (auto v : c.variants) j["rank"].push_back(key(std::string("rank_") + to_string(v)));
    if (c.run_loe) j["loe"] = key("loe");
    j["annotations"] = file_hash(c.annotations);
    j["exclude_abstentions"] = c.exclude_abstentions;
    j["k"] = c.recall_k;
  } else if (stage == "report") {
    for (auto v : c.variants) j["rank"].push_back(key(std::string("rank_") + to_string(v)));
    if (c.run_loe) j["loe"] = key("loe");
    if (!c.annotations.empty()) j["eval"] = key("eval");
  } else {
    throw ConfigError("unknown stage '" + stage + "'");
  }
  return io::sha256_hex(j.dump());
}

bool Pipeline::is_current(const std::string& stage) {
  const fs::path stamp = stage_dir(stage) / "stage.json";
  if (!fs::exists(stamp)) return false;
  try {
    return json::parse(io::read_file(stamp)).at("key").get<std::string>() == key(stage);
  } catch (const json::exception&) {
    return false;
  }
}

void Pipeline::require(const std::string& stage, const std::string& command) {
  if (!is_current(stage))
    throw DataError("output of stage '" + stage + "' in " + config_.workdir.string() +
                    " is missing or stale; run `pacte " + command + "` first (or `pacte pipeline`)");
}

StageReport Pipeline::run_stage(const std::string& stage,
                                const std::function<void(const fs::path&)>& build) {
  if (is_current(stage)) {
    if (log_) *log_ << "[" << stage << "] cached\n";
    return {stage, StageStatus::Cached};
  }
  const fs::path final_dir = stage_dir(stage);
  const fs::path tmp = config_.workdir / ("." + stage + ".tmp");
  try {
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    build(tmp);
    json stamp;
    stamp["stage"] = stage;
    stamp["key"] = key(stage);
    io::write_file_atomic(tmp / "stage.json", stamp.dump(2) + "\n");
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
  } catch (const StageError&) {
    fs::remove_all(tmp);
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(tmp);
    throw StageError(stage, e.what());
  }
  if (log_) *log_ << "[" << stage << "] computed\n";
  return {stage, StageStatus::Computed};
}

// ---- artifact loaders ------------------------------------------------------

const Corpus& Pipeline::corpus() {
  if (!corpus_) corpus_ = parse_tokens_jsonl(io::read_file(stage_dir("preprocess") / "corpus.jsonl"));
  return *corpus_;
}

const Vocabulary& Pipeline::vocabulary() {
  if (!vocab_) {
    const json j = json::parse(io::read_file(stage_dir("preprocess") / "vocab.json"));
    vocab_ = Vocabulary(j.at("tokens").get<std::vector<std::string>>(),
                        j.at("document_frequency").get<std::vector<std::size_t>>());
  }
  return *vocab_;
}

const LdaModel& Pipeline::model() {
  if (!model_) model_ = load_lda(stage_dir("lda"));
  return *model_;
}

std::vector<std::size_t> Pipeline::side_indices(const std::string& side) {
  std::vector<std::size_t> idx;
  if (side == kAggregateSides[0]) idx = corpus().indices(Side::Liberal);
  else if (side == kAggregateSides[1]) idx = corpus().indices(Side::Conservative);
  else idx = corpus().indices_of_source(side);
  if (idx.empty()) throw DataError("no documents for source '" + side + "'");
  return idx;
}

std::vector<int> Pipeline::included_topics() {
  std::vector<int> out;
  for (int t = 0; t < model().num_topics; ++t)
    if (!config_.excluded_topics.count(t)) out.push_back(t);
  return out;
}

std::vector<TopicInputs> Pipeline::topic_inputs(const PairSpec& pair) {
  const auto left = side_indices(pair.left);
  const auto right = side_indices(pair.right);
  std::vector<TopicInputs> out;
  for (int t : included_topics()) {
    out.push_back({top_keywords(model(), vocabulary(), t, std::min(config_.m, vocabulary().size())),
                   top_documents(model(), corpus(), left, t, config_.n, pair.left),
                   top_documents(model(), corpus(), right, t, config_.n, pair.right)});
  }
  return out;
}

std::vector<std::string> Pipeline::docs_to_embed() {
  std::set<std::size_t> docs;
  for (const auto& pair : config_.effective_pairs())
    for (const auto& t : topic_inputs(pair)) {
      for (const auto& e : t.left.entries) docs.insert(e.doc);
      for (const auto& e : t.right.entries) docs.insert(e.doc);
    }
  std::vector<std::string> ids;
  for (auto d : docs) ids.push_back(corpus()[d].id);
  return ids;
}

std::map<std::string, ContextualEncoding> Pipeline::encodings_for(
    const std::string& mode, const std::vector<std::string>& ids) {
  std::map<std::string, ContextualEncoding> out;
  const EmbeddingStore store =
      EmbeddingStore::open(mode == "store" ? store_index() : stage_dir("embed_" + mode) / "index.json");
  for (const auto& id : ids) out.emplace(id, store.load(id));
  return out;
}

// ---- stages ----------------------------------------------------------------

StageReport Pipeline::preprocess() {
  return run_stage("preprocess", [&](const fs::path& dir) {
    if (config_.sources.empty()) throw ConfigError("no source-to-side map configured");
    IngestStats stats;
    const Corpus raw = ingest_jsonl(config_.corpus, config_.sources, &stats);
    PreprocessConfig pc;
    if (!config_.stopwords.empty()) {
      const auto words = io::read_list_file(config_.stopwords);
      pc.stopwords = std::set<std::string>(words.begin(), words.end());
    }
    pc.extra_stopwords = std::set<std::string>(config_.extra_stopwords.begin(),
                                               config_.extra_stopwords.end());
    if (!config_.lemmas.empty()) {
      std::unordered_map<std::string, std::string> lemmas;
      for (const auto& [k, v] : io::read_map_file(config_.lemmas)) lemmas[k] = v;
      pc.lemmas = std::move(lemmas);
    }
    const Corpus cleaned = pacte::preprocess(raw, pc);
    auto [bigrams, merged] = bigram_transform(cleaned, config_.bigram_min_count, config_.bigram_threshold);
    const Vocabulary vocab = build_vocabulary(merged, config_.min_df, config_.max_df_fraction);
    // Keep in-vocabulary tokens only; documents left empty are dropped.
    std::vector<Document> kept;
    std::size_t dropped = 0;
    for (auto doc : merged.documents()) {
      std::erase_if(doc.tokens, [&](const std::string& t) { return !vocab.index(t); });
      if (doc.tokens.empty()) {
        ++dropped;
        continue;
      }
      kept.push_back(std::move(doc));
    }
    if (kept.empty()) throw DataError("no documents left after preprocessing");
    const Corpus final_corpus(std::move(kept));
    io::write_file_atomic(dir / "corpus.jsonl", tokens_jsonl(final_corpus, true));
    json v;
    v["tokens"] = vocab.tokens();
    std::vector<std::size_t> df;
    for (std::size_t i = 0; i < vocab.size(); ++i) df.push_back(vocab.document_frequency(i));
    v["document_frequency"] = df;
    io::write_file_atomic(dir / "vocab.json", v.dump() + "\n");
    json b = json::array();
    for (const auto& [pair, score] : bigrams.scored_pairs())
      b.push_back({pair.first, pair.second, score});
    json s;
    s["input_lines"] = stats.lines;
    s["duplicate_texts_skipped"] = stats.duplicate_texts;
    s["empty_documents_dropped"] = dropped;
    s["documents"] = final_corpus.size();
    s["vocabulary_size"] = vocab.size();
    s["bigrams"] = b;
    io::write_file_atomic(dir / "summary.json", s.dump(2) + "\n");
    if (log_ && dropped)
      *log_ << "[preprocess] warning: dropped " << dropped << " documents with no tokens left\n";
  });
}

void Pipeline::export_tokens(const fs::path& path) {
  require("preprocess", "preprocess");
  io::write_file_atomic(path, tokens_jsonl(corpus(), false));
}

StageReport Pipeline::lda() {
  require("preprocess", "preprocess");
  return run_stage("lda", [&](const fs::path& dir) {
    LdaParams params = config_.lda;
    json coherence = json::array();
    LdaModel m;
    if (config_.k_min > 0) {
      auto result = select_k(corpus(), vocabulary(), config_.k_min, config_.k_max, params, config_.m);
      for (const auto& s : result.scores)
        coherence.push_back({{"k", s.num_topics}, {"npmi", s.value}, {"per_topic", s.per_topic}});
      m = std::move(result.model);
    } else {
      m = train_lda(corpus(), vocabulary(), params);
      const auto s = coherence_npmi(m, corpus(), vocabulary(), std::min(config_.m, vocabulary().size()));
      coherence.push_back({{"k", s.num_topics}, {"npmi", s.value}, {"per_topic", s.per_topic}});
    }
    save_lda(m, dir);
    json topics = json::array();
    for (int t = 0; t < m.num_topics; ++t) {
      json kw = json::array();
      for (const auto& e : top_keywords(m, vocabulary(), t, std::min(config_.m, vocabulary().size())).entries)
        kw.push_back({e.token, e.weight});
      topics.push_back({{"topic", t}, {"keywords", kw}});
    }
    io::write_file_atomic(dir / "topics.json", topics.dump(2) + "\n");
    io::write_file_atomic(dir / "coherence.json", coherence.dump(2) + "\n");
    model_ = std::move(m);
  });
}

StageReport Pipeline::split() {
  require("lda", config_.k_min > 0 ? "select-k" : "lda");
  return run_stage("split", [&](const fs::path& dir) {
    auto [train, validation] =
        split_by_topicality(corpus(), model().theta, model().num_topics, config_.topicality_threshold);
    json j;
    j["threshold"] = config_.topicality_threshold;
    j["train"] = json::array();
    j["validation"] = json::array();
    for (const auto& d : train.documents()) j["train"].push_back(d.id);
    for (const auto& d : validation.documents()) j["validation"].push_back(d.id);
    io::write_file_atomic(dir / "split.json", j.dump(1) + "\n");
  });
}

std::vector<StageReport> Pipeline::train() {
  std::vector<StageReport> out;
  for (const auto& mode : encoder_modes()) {
    if (mode == "none" || mode == "store") continue;
    require("split", "train");
    out.push_back(run_stage("train_" + mode, [&](const fs::path& dir) {
      const json split = json::parse(io::read_file(stage_dir("split") / "split.json"));
      auto pick = [&](const char* name) {
        std::vector<Document> docs;
        for (const auto& id : split.at(name)) docs.push_back(corpus()[*corpus().find(id.get<std::string>())]);
        return Corpus(std::move(docs));
      };
      const Corpus train_set = pick("train");
      const Corpus validation_set = pick("validation");
      TrainConfig tc = config_.train;
      tc.label_mode = parse_label_mode(mode);
      const EncoderModel initial(config_.encoder, vocabulary().tokens(), config_.encoder_seed);
      if (log_ && validation_set.size() == 0)
        *log_ << "[train_" << mode << "] warning: validation split is empty; selecting the "
                 "checkpoint on the training set\n";
      const TrainResult result = train_partisanship(initial, train_set, validation_set, tc);
      result.model.save(dir);
      json metrics;
      metrics["label_mode"] = mode;
      metrics["train_documents"] = train_set.size();
      metrics["validation_documents"] = validation_set.size();
      metrics["validated_on_train"] = result.validated_on_train;
      metrics["best_epoch"] = result.best_epoch;
      metrics["epochs"] = json::array();
      for (const auto& e : result.history)
        metrics["epochs"].push_back({{"epoch", e.epoch},
                                     {"train_loss", e.train_loss},
                                     {"precision", e.validation.precision},
                                     {"recall", e.validation.recall},
                                     {"f1", e.validation.f1},
                                     {"accuracy", e.validation.accuracy}});
      io::write_file_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
    }));
  }
  return out;
}

std::vector<StageReport> Pipeline::embed() {
  std::vector<StageReport> out;
  for (const auto& mode : encoder_modes()) {
    if (mode == "store") continue;
    require("lda", config_.k_min > 0 ? "select-k" : "lda");
    if (mode != "none") require("train_" + mode, "train");
    out.push_back(run_stage("embed_" + mode, [&](const fs::path& dir) {
      const EncoderModel model =
          mode == "none" ? EncoderModel(config_.encoder, vocabulary().tokens(), config_.encoder_seed)
                         : EncoderModel::load(stage_dir("train_" + mode));
      std::vector<ContextualEncoding> encodings;
      for (const auto& id : docs_to_embed()) encodings.push_back(encode(model, corpus()[*corpus().find(id)]));
      write_embedding_store(dir, "builtin-" + mode, encodings);
    }));
  }
  return out;
}

std::vector<StageReport> Pipeline::rank() {
  std::vector<StageReport> out;
  const bool external = !config_.embedding_store.empty();
  for (auto variant : config_.variants) {
    const std::string mode = encoder_mode_for(variant, external);
    require("lda", config_.k_min > 0 ? "select-k" : "lda");
    if (mode != "store") require("embed_" + mode, "embed");
    out.push_back(run_stage(std::string("rank_") + to_string(variant), [&](const fs::path& dir) {
      const auto ids = docs_to_embed();
      const auto encodings = encodings_for(mode, ids);
      for (const auto& pair : config_.effective_pairs()) {
        const auto inputs = topic_inputs(pair);
        TopicRanking ranking = rank_topics(run_variant(variant, inputs, encodings), config_.excluded_topics);
        ranking.left = pair.left;
        ranking.right = pair.right;
        ranking.variant = to_string(variant);
        io::write_file_atomic(dir / (pair.label() + ".json"), ranking_to_json(ranking));
      }
    }));
  }
  return out;
}

StageReport Pipeline::loe() {
  require("lda", config_.k_min > 0 ? "select-k" : "lda");
  return run_stage("loe", [&](const fs::path& dir) {
    for (const auto& pair : config_.effective_pairs()) {
      const auto left = side_indices(pair.left);
      const auto right = side_indices(pair.right);
      std::vector<PolarizationScore> scores;
      for (int t : included_topics()) {
        const auto r = loe_topic(model(), corpus(), left, right, t, config_.n);
        scores.push_back({t, r.pi, 1.0 - 2.0 * r.pi});
      }
      TopicRanking ranking = rank_topics(std::move(scores), config_.excluded_topics);
      ranking.left = pair.left;
      ranking.right = pair.right;
      ranking.variant = "LOE";
      io::write_file_atomic(dir / (pair.label() + ".json"), ranking_to_json(ranking));
    }
  });
}

std::optional<StageReport> Pipeline::eval() {
  if (config_.annotations.empty()) {
    if (log_) *log_ << "[eval] skipped: no annotations configured\n";
    return std::nullopt;
  }
  for (auto v : config_.variants) require(std::string("rank_") + to_string(v), "rank");
  if (config_.run_loe) require("loe", "loe");
  return run_stage("eval", [&](const fs::path& dir) {
    const AnnotationSet annotations = load_annotations(config_.annotations);
    std::vector<RecallCell> cells;
    json truth = json::array();
    auto side_sources = [&](const std::string& side) {
      std::set<std::string> out;
      if (side == kAggregateSides[0] || side == kAggregateSides[1]) {
        const Side s = side == kAggregateSides[0] ? Side::Liberal : Side::Conservative;
        for (const auto& [src, sd] : config_.sources)
          if (sd == s) out.insert(src);
      } else {
        out.insert(side);
      }
      return out;
    };
    std::vector<std::pair<std::string, fs::path>> methods;
    if (config_.run_loe) methods.emplace_back("LOE", stage_dir("loe"));
    for (auto v : config_.variants)
      methods.emplace_back(to_string(v), stage_dir(std::string("rank_") + to_string(v)));
    for (const auto& pair : config_.effective_pairs()) {
      const GroundTruth gt = gt_polarization_and_ranking(
          annotations, side_sources(pair.left), side_sources(pair.right), pair.left, pair.right,
          config_.exclude_abstentions);
      json topics = json::array();
      for (const auto& t : gt.topics)
        topics.push_back({{"topic", t.topic}, {"le_left", t.le_left}, {"le_right", t.le_right},
                          {"alpha", t.alpha}});
      truth.push_back({{"pair", {pair.left, pair.right}},
                       {"topics", topics},
                       {"targets", gt.targets(config_.recall_k)}});
      for (const auto& [name, mdir] : methods) {
        const auto ranking = ranking_from_json(io::read_file(mdir / (pair.label() + ".json")));
        cells.push_back({pair.left, pair.right, name,
                         recall_at_k(ranking.order(), gt, config_.recall_k)});
      }
    }
    json out = json::parse(recall_table_json(cells));
    out["k"] = config_.recall_k;
    out["ground_truth"] = truth;
    io::write_file_atomic(dir / "eval.json", out.dump(2) + "\n");
    io::write_file_atomic(dir / "eval.md", recall_table_markdown(cells, config_.recall_k));
  });
}

std::vector<StageReport> Pipeline::run_all() {
  std::vector<StageReport> out;
  auto append = [&](std::vector<StageReport> r) { out.insert(out.end(), r.begin(), r.end()); };
  out.push_back(preprocess());
  out.push_back(lda());
  const auto modes = encoder_modes();
  const bool trains = std::any_of(modes.begin(), modes.end(), [](const std::string& m) {
    return m == "true_labels" || m == "shuffled_labels";
  });
  if (trains) {
    out.push_back(split());
    append(train());
  }
  append(embed());
  append(rank());
  if (config_.run_loe) out.push_back(loe());
  if (auto e = eval()) out.push_back(*e);
  out.push_back(report());
  return out;
}

}  // namespace pacte
