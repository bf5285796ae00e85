#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pacte/corpus.hpp"
#include "pacte/embedding_store.hpp"

namespace pacte {

// Token ids: 0 is the pooled position prepended to every sequence, 1 stands
// for out-of-vocabulary words, vocabulary words start at 2.
inline constexpr int kPooledToken = 0;
inline constexpr int kUnknownToken = 1;
inline constexpr int kReservedTokens = 2;

struct EncoderConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int ffn_dim = 128;
  int max_len = 256;

  void validate() const;
};

// One named block inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool decay = true;  // excluded from weight decay: biases and layer-norm parameters
};

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
  struct Layer {
    std::vector<double> x_in, xhat1, rstd1, h1, q, k, v, attn, ctx;
    std::vector<double> x_mid, xhat2, rstd2, h2, u, g;
  };
  std::vector<int> ids;
  std::size_t length = 0;
  std::vector<Layer> layers;
  std::vector<double> x_last, xhatf, rstdf, out;  // out: final-layer states
  double logit = 0.0;
};

class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, std::vector<std::string> vocabulary, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t num_token_ids() const { return vocab_.size() + kReservedTokens; }

  // Prepends the pooled token and truncates to max_len positions.
  std::vector<int> token_ids(std::span<const std::string> tokens) const;

  ForwardTrace forward(std::span<const int> ids) const;
  double logit(std::span<const int> ids) const { return forward(ids).logit; }

  // Binary cross-entropy of sigmoid(logit) against target; gradient is added
  // into grad (same layout as parameters()) scaled by `scale`.
  double loss(std::span<const int> ids, double target) const;
  double loss_and_gradient(std::span<const int> ids, double target, std::span<double> grad,
                           double scale = 1.0) const;

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  void save(const std::filesystem::path& dir) const;
  static EncoderModel load(const std::filesystem::path& dir);

 private:
  struct LayerOffsets {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  std::size_t add_block(const std::string& name, std::size_t size, bool decay);
  void backward(const ForwardTrace& trace, double dlogit, std::span<double> grad) const;
  const double* p(std::size_t offset) const { return params_.data() + offset; }

  EncoderConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> vocab_index_;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<LayerOffsets> layers_;
};

enum class LabelMode { TrueLabels, ShuffledLabels, None };

const char* to_string(LabelMode mode);
LabelMode parse_label_mode(const std::string& text);

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 5e-4;
  std::size_t batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 1;
  LabelMode label_mode = LabelMode::TrueLabels;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ClassifierMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean BCE over the training set after the epoch
  ClassifierMetrics validation;
};

struct TrainResult {
  EncoderModel model;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;  // 0 means the initial parameters were kept
  bool validated_on_train = false;
};

// Liberal is the positive class.
inline double side_target(Side side) { return side == Side::Liberal ? 1.0 : 0.0; }

ClassifierMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth);
ClassifierMetrics evaluate_classifier(const EncoderModel& model, const Corpus& corpus);

// Seeded permutation of the label multiset.
std::vector<Side> shuffled_labels(const Corpus& corpus, std::uint64_t seed);

// Starts from `initial`; with LabelMode::None the initial parameters are
// returned untouched. An empty validation set falls back to the training set
// for checkpoint selection.
TrainResult train_partisanship(const EncoderModel& initial, const Corpus& train,
                               const Corpus& validation, const TrainConfig& tc);

// theta is D x K row-major, rows aligned with corpus documents.
std::pair<Corpus, Corpus> split_by_topicality(const Corpus& corpus, std::span<const double> theta,
                                              std::size_t num_topics, double threshold = 0.15);

ContextualEncoding encode(const EncoderModel& model, const Document& doc);

}  // namespace pacte
