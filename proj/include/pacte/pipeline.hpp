#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "pacte/core.hpp"
#include "pacte/corpus.hpp"
#include "pacte/encoder.hpp"
#include "pacte/error.hpp"
#include "pacte/topics.hpp"

namespace pacte {

// A side of a pair is either a source name or "Liberal" / "Conservative" for
// the aggregated side corpus.
struct PairSpec {
  std::string left;
  std::string right;

  std::string label() const;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path stopwords;  // empty: built-in English list
  std::filesystem::path lemmas;
  std::filesystem::path annotations;
  std::filesystem::path embedding_store;  // index.json or its directory
  std::filesystem::path workdir = "pacte_work";
  SourceMap sources;
  std::vector<std::string> extra_stopwords = {"cnn", "fox", "huffington", "breitbart"};
  int bigram_min_count = 5;
  double bigram_threshold = 10.0;
  std::size_t min_df = 1;
  double max_df_fraction = 1.0;
  LdaParams lda;
  int k_min = 0;  // k_min > 0 selects K by coherence over [k_min, k_max]
  int k_max = 0;
  std::set<int> excluded_topics;
  std::size_t m = 10;
  std::size_t n = 10;
  EncoderConfig encoder;
  std::uint64_t encoder_seed = 1;
  TrainConfig train;
  double topicality_threshold = 0.15;
  std::vector<VariantMode> variants = {VariantMode::PaCTE};
  bool run_loe = true;
  std::vector<PairSpec> pairs;  // empty: Liberal vs Conservative
  bool exclude_abstentions = false;
  std::size_t recall_k = 3;

  void validate() const;
  std::vector<PairSpec> effective_pairs() const;
};

// Relative paths resolve against base_dir. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

enum class StageStatus { Computed, Cached };

struct StageReport {
  std::string stage;
  StageStatus status = StageStatus::Computed;
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage " + stage + ": " + cause), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Each stage writes into workdir/<stage>/ together with a stamp holding the
// content hash of everything it depends on. A stage whose stamp matches is
// reused; otherwise it is rebuilt in a temporary directory and renamed into
// place. Running a single stage requires its upstream stages to be current.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& workdir() const { return config_.workdir; }

  StageReport preprocess();
  StageReport lda();
  StageReport split();
  std::vector<StageReport> train();
  std::vector<StageReport> embed();
  std::vector<StageReport> rank();
  StageReport loe();
  std::optional<StageReport> eval();
  StageReport report();

  // Every stage in order, computing what is missing or stale.
  std::vector<StageReport> run_all();

  // {"id", "side", "tokens"} per line for external encoders.
  void export_tokens(const std::filesystem::path& path);

  // Encoder mode names ("true_labels", "shuffled_labels", "none" or "store")
  // needed by the configured variants, in a fixed order.
  std::vector<std::string> encoder_modes() const;
  static std::string encoder_mode_for(VariantMode mode, bool external_store);

 private:
  std::string key(const std::string& stage);
  std::string compute_key(const std::string& stage);
  bool is_current(const std::string& stage);
  void require(const std::string& stage, const std::string& command);
  StageReport run_stage(const std::string& stage,
                        const std::function<void(const std::filesystem::path&)>& build);
  std::filesystem::path stage_dir(const std::string& stage) const { return config_.workdir / stage; }

  // Artifact loaders.
  const Corpus& corpus();
  const Vocabulary& vocabulary();
  const LdaModel& model();
  std::vector<std::size_t> side_indices(const std::string& side);
  std::vector<int> included_topics();
  std::vector<TopicInputs> topic_inputs(const PairSpec& pair);
  std::vector<std::string> docs_to_embed();
  std::map<std::string, ContextualEncoding> encodings_for(const std::string& mode,
                                                          const std::vector<std::string>& ids);
  std::string file_hash(const std::filesystem::path& path);
  std::filesystem::path store_index() const;

  PipelineConfig config_;
  std::ostream* log_;
  std::map<std::string, std::string> keys_;
  std::optional<Corpus> corpus_;
  std::optional<Vocabulary> vocab_;
  std::optional<LdaModel> model_;
};

std::string sanitize_name(const std::string& name);

}  // namespace pacte
