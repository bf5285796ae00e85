#include "pacte/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "pacte/error.hpp"
#include "pacte/io.hpp"
#include "pacte/random.hpp"

namespace pacte {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

// out (T x m) = a (T x n) * w (n x m) + b
void affine(const double* a, std::size_t T, std::size_t n, const double* w, const double* b,
            std::size_t m, double* out) {
  for (std::size_t t = 0; t < T; ++t) {
    double* o = out + t * m;
    std::copy(b, b + m, o);
    for (std::size_t i = 0; i < n; ++i) {
      const double ai = a[t * n + i];
      const double* wi = w + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += ai * wi[j];
    }
  }
}

// Accumulates da (if given), dw and db for out = a * w + b.
void affine_backward(const double* a, const double* dout, std::size_t T, std::size_t n,
                     std::size_t m, const double* w, double* da, double* dw, double* db) {
  for (std::size_t t = 0; t < T; ++t) {
    const double* go = dout + t * m;
    for (std::size_t j = 0; j < m; ++j) db[j] += go[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double ai = a[t * n + i];
      const double* wi = w + i * m;
      double* dwi = dw + i * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        dwi[j] += ai * go[j];
        acc += go[j] * wi[j];
      }
      if (da) da[t * n + i] += acc;
    }
  }
}

void layer_norm(const double* x, std::size_t T, std::size_t d, const double* g, const double* b,
                double* xhat, double* rstd, double* y) {
  for (std::size_t t = 0; t < T; ++t) {
    const double* xt = x + t * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xt[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xt[c] - mean) * (xt[c] - mean);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[t] = r;
    for (std::size_t c = 0; c < d; ++c) {
      xhat[t * d + c] = (xt[c] - mean) * r;
      y[t * d + c] = xhat[t * d + c] * g[c] + b[c];
    }
  }
}

// Accumulates dx, dg, db.
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd,
                         const double* g, std::size_t T, std::size_t d, double* dx, double* dg,
                         double* db) {
  std::vector<double> dxhat(d);
  for (std::size_t t = 0; t < T; ++t) {
    const double* dyt = dy + t * d;
    const double* xh = xhat + t * d;
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dg[c] += dyt[c] * xh[c];
      db[c] += dyt[c];
      dxhat[c] = dyt[c] * g[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xh[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c)
      dx[t * d + c] += rstd[t] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
  }
}

double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void EncoderConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || n_layers < 0 || ffn_dim < 1)
    throw ConfigError("encoder dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
}

std::size_t EncoderModel::add_block(const std::string& name, std::size_t size, bool decay) {
  const std::size_t offset = params_.size();
  blocks_.push_back({name, offset, size, decay});
  params_.resize(offset + size, 0.0);
  return offset;
}

EncoderModel::EncoderModel(EncoderConfig config, std::vector<std::string> vocabulary,
                           std::uint64_t seed)
    : config_(config), vocab_(std::move(vocabulary)) {
  config_.validate();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!vocab_index_.emplace(vocab_[i], static_cast<int>(i) + kReservedTokens).second)
      throw ConfigError("encoder vocabulary lists '" + vocab_[i] + "' twice");
  }
  const std::size_t d = config_.d_model, f = config_.ffn_dim;
  tok_emb_ = add_block("token_embedding", num_token_ids() * d, true);
  pos_emb_ = add_block("position_embedding", static_cast<std::size_t>(config_.max_len) * d, true);
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerOffsets o{};
    o.ln1_g = add_block(pre + "ln1.gain", d, false);
    o.ln1_b = add_block(pre + "ln1.bias", d, false);
    o.wq = add_block(pre + "attn.wq", d * d, true);
    o.bq = add_block(pre + "attn.bq", d, false);
    o.wk = add_block(pre + "attn.wk", d * d, true);
    o.bk = add_block(pre + "attn.bk", d, false);
    o.wv = add_block(pre + "attn.wv", d * d, true);
    o.bv = add_block(pre + "attn.bv", d, false);
    o.wo = add_block(pre + "attn.wo", d * d, true);
    o.bo = add_block(pre + "attn.bo", d, false);
    o.ln2_g = add_block(pre + "ln2.gain", d, false);
    o.ln2_b = add_block(pre + "ln2.bias", d, false);
    o.w1 = add_block(pre + "ffn.w1", d * f, true);
    o.b1 = add_block(pre + "ffn.b1", f, false);
    o.w2 = add_block(pre + "ffn.w2", f * d, true);
    o.b2 = add_block(pre + "ffn.b2", d, false);
    layers_.push_back(o);
  }
  lnf_g_ = add_block("final_ln.gain", d, false);
  lnf_b_ = add_block("final_ln.bias", d, false);
  head_w_ = add_block("head.weight", d, true);
  head_b_ = add_block("head.bias", 1, false);

  Rng rng(seed);
  auto fill = [&](std::size_t offset, std::size_t size, double stddev) {
    for (std::size_t i = 0; i < size; ++i) params_[offset + i] = stddev * rng.normal();
  };
  fill(tok_emb_, num_token_ids() * d, 1.0);
  fill(pos_emb_, static_cast<std::size_t>(config_.max_len) * d, 0.1);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sf = 1.0 / std::sqrt(static_cast<double>(f));
  for (const auto& o : layers_) {
    std::fill_n(params_.begin() + o.ln1_g, d, 1.0);
    std::fill_n(params_.begin() + o.ln2_g, d, 1.0);
    fill(o.wq, d * d, sd);
    fill(o.wk, d * d, sd);
    fill(o.wv, d * d, sd);
    fill(o.wo, d * d, sd);
    fill(o.w1, d * f, sd);
    fill(o.w2, f * d, sf);
  }
  std::fill_n(params_.begin() + lnf_g_, d, 1.0);
  fill(head_w_, d, sd);
}

std::vector<int> EncoderModel::token_ids(std::span<const std::string> tokens) const {
  const std::size_t keep = std::min(tokens.size(), static_cast<std::size_t>(config_.max_len) - 1);
  std::vector<int> ids;
  ids.reserve(keep + 1);
  ids.push_back(kPooledToken);
  for (std::size_t i = 0; i < keep; ++i) {
    auto it = vocab_index_.find(tokens[i]);
    ids.push_back(it == vocab_index_.end() ? kUnknownToken : it->second);
  }
  return ids;
}

ForwardTrace EncoderModel::forward(std::span<const int> ids) const {
  const std::size_t T = ids.size();
  if (T == 0 || T > static_cast<std::size_t>(config_.max_len))
    throw DataError("sequence length " + std::to_string(T) + " outside [1, max_len]");
  const std::size_t d = config_.d_model, f = config_.ffn_dim, H = config_.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardTrace tr;
  tr.ids.assign(ids.begin(), ids.end());
  tr.length = T;
  std::vector<double> x(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= num_token_ids())
      throw DataError("token id " + std::to_string(id) + " out of range");
    const double* te = p(tok_emb_) + static_cast<std::size_t>(id) * d;
    const double* pe = p(pos_emb_) + t * d;
    for (std::size_t c = 0; c < d; ++c) x[t * d + c] = te[c] + pe[c];
  }

  std::vector<double> tmp(T * d), scores(T);
  for (const auto& o : layers_) {
    ForwardTrace::Layer L;
    L.x_in = x;
    L.xhat1.resize(T * d);
    L.rstd1.resize(T);
    L.h1.resize(T * d);
    layer_norm(x.data(), T, d, p(o.ln1_g), p(o.ln1_b), L.xhat1.data(), L.rstd1.data(), L.h1.data());
    L.q.resize(T * d);
    L.k.resize(T * d);
    L.v.resize(T * d);
    affine(L.h1.data(), T, d, p(o.wq), p(o.bq), d, L.q.data());
    affine(L.h1.data(), T, d, p(o.wk), p(o.bk), d, L.k.data());
    affine(L.h1.data(), T, d, p(o.wv), p(o.bv), d, L.v.data());
    L.attn.assign(H * T * T, 0.0);
    L.ctx.assign(T * d, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < T; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < T; ++j) {
          double s = 0.0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += L.q[i * d + c] * L.k[j * d + c];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double* a = L.attn.data() + (h * T + i) * T;
        double z = 0.0;
        for (std::size_t j = 0; j < T; ++j) z += (a[j] = std::exp(scores[j] - mx));
        double sum = 0.0;
        for (std::size_t j = 0; j < T; ++j) sum += (a[j] /= z);
        if (!(std::abs(sum - 1.0) <= 1e-6))
          throw NumericError("attention row does not sum to 1 (sum " + std::to_string(sum) + ")");
        for (std::size_t j = 0; j < T; ++j)
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
            L.ctx[i * d + c] += a[j] * L.v[j * d + c];
      }
    }
    affine(L.ctx.data(), T, d, p(o.wo), p(o.bo), d, tmp.data());
    L.x_mid.resize(T * d);
    for (std::size_t i = 0; i < T * d; ++i) L.x_mid[i] = L.x_in[i] + tmp[i];
    L.xhat2.resize(T * d);
    L.rstd2.resize(T);
    L.h2.resize(T * d);
    layer_norm(L.x_mid.data(), T, d, p(o.ln2_g), p(o.ln2_b), L.xhat2.data(), L.rstd2.data(),
               L.h2.data());
    L.u.resize(T * f);
    L.g.resize(T * f);
    affine(L.h2.data(), T, d, p(o.w1), p(o.b1), f, L.u.data());
    for (std::size_t i = 0; i < T * f; ++i) L.g[i] = gelu(L.u[i]);
    affine(L.g.data(), T, f, p(o.w2), p(o.b2), d, tmp.data());
    for (std::size_t i = 0; i < T * d; ++i) x[i] = L.x_mid[i] + tmp[i];
    tr.layers.push_back(std::move(L));
  }
  tr.x_last = x;
  tr.xhatf.resize(T * d);
  tr.rstdf.resize(T);
  tr.out.resize(T * d);
  layer_norm(x.data(), T, d, p(lnf_g_), p(lnf_b_), tr.xhatf.data(), tr.rstdf.data(), tr.out.data());
  double z = params_[head_b_];
  for (std::size_t c = 0; c < d; ++c) z += params_[head_w_ + c] * tr.out[c];
  tr.logit = z;
  return tr;
}

double EncoderModel::loss(std::span<const int> ids, double target) const {
  return bce_with_logit(forward(ids).logit, target);
}

double EncoderModel::loss_and_gradient(std::span<const int> ids, double target,
                                       std::span<double> grad, double scale) const {
  if (grad.size() != params_.size()) throw DataError("gradient buffer has wrong size");
  const ForwardTrace tr = forward(ids);
  backward(tr, scale * (sigmoid(tr.logit) - target), grad);
  return bce_with_logit(tr.logit, target);
}

void EncoderModel::backward(const ForwardTrace& tr, double dlogit, std::span<double> grad) const {
  const std::size_t T = tr.length;
  const std::size_t d = config_.d_model, f = config_.ffn_dim, H = config_.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  double* G = grad.data();

  std::vector<double> dout(T * d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    dout[c] = dlogit * params_[head_w_ + c];
    G[head_w_ + c] += dlogit * tr.out[c];
  }
  G[head_b_] += dlogit;
  std::vector<double> dx(T * d, 0.0);
  layer_norm_backward(dout.data(), tr.xhatf.data(), tr.rstdf.data(), p(lnf_g_), T, d, dx.data(),
                      G + lnf_g_, G + lnf_b_);

  std::vector<double> dg(T * f), dh2(T * d), dctx(T * d), dq(T * d), dk(T * d), dv(T * d),
      dh1(T * d), dA(T);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& o = layers_[l];
    const auto& L = tr.layers[l];
    // Feed-forward sublayer.
    std::fill(dg.begin(), dg.end(), 0.0);
    affine_backward(L.g.data(), dx.data(), T, f, d, p(o.w2), dg.data(), G + o.w2, G + o.b2);
    for (std::size_t i = 0; i < T * f; ++i) dg[i] *= gelu_grad(L.u[i]);
    std::fill(dh2.begin(), dh2.end(), 0.0);
    affine_backward(L.h2.data(), dg.data(), T, d, f, p(o.w1), dh2.data(), G + o.w1, G + o.b1);
    layer_norm_backward(dh2.data(), L.xhat2.data(), L.rstd2.data(), p(o.ln2_g), T, d, dx.data(),
                        G + o.ln2_g, G + o.ln2_b);
    // dx now holds the gradient w.r.t. x_mid. Attention sublayer.
    std::fill(dctx.begin(), dctx.end(), 0.0);
    affine_backward(L.ctx.data(), dx.data(), T, d, d, p(o.wo), dctx.data(), G + o.wo, G + o.bo);
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t c0 = h * dh, c1 = (h + 1) * dh;
      for (std::size_t i = 0; i < T; ++i) {
        const double* a = L.attn.data() + (h * T + i) * T;
        double dot = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          double s = 0.0;
          for (std::size_t c = c0; c < c1; ++c) {
            s += dctx[i * d + c] * L.v[j * d + c];
            dv[j * d + c] += a[j] * dctx[i * d + c];
          }
          dA[j] = s;
          dot += s * a[j];
        }
        for (std::size_t j = 0; j < T; ++j) {
          const double ds = a[j] * (dA[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = c0; c < c1; ++c) {
            dq[i * d + c] += ds * L.k[j * d + c];
            dk[j * d + c] += ds * L.q[i * d + c];
          }
        }
      }
    }
    std::fill(dh1.begin(), dh1.end(), 0.0);
    affine_backward(L.h1.data(), dq.data(), T, d, d, p(o.wq), dh1.data(), G + o.wq, G + o.bq);
    affine_backward(L.h1.data(), dk.data(), T, d, d, p(o.wk), dh1.data(), G + o.wk, G + o.bk);
    affine_backward(L.h1.data(), dv.data(), T, d, d, p(o.wv), dh1.data(), G + o.wv, G + o.bv);
    layer_norm_backward(dh1.data(), L.xhat1.data(), L.rstd1.data(), p(o.ln1_g), T, d, dx.data(),
                        G + o.ln1_g, G + o.ln1_b);
  }
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t id = static_cast<std::size_t>(tr.ids[t]);
    for (std::size_t c = 0; c < d; ++c) {
      G[tok_emb_ + id * d + c] += dx[t * d + c];
      G[pos_emb_ + t * d + c] += dx[t * d + c];
    }
  }
}

void EncoderModel::save(const fs::path& dir) const {
  json header;
  header["d_model"] = config_.d_model;
  header["n_heads"] = config_.n_heads;
  header["n_layers"] = config_.n_layers;
  header["ffn_dim"] = config_.ffn_dim;
  header["max_len"] = config_.max_len;
  header["vocabulary"] = vocab_;
  header["num_parameters"] = params_.size();
  io::write_file_atomic(dir / "encoder.bin", io::encode_f64_array(params_));
  io::write_file_atomic(dir / "encoder.json", header.dump(1) + "\n");
}

EncoderModel EncoderModel::load(const fs::path& dir) {
  json header;
  try {
    header = json::parse(io::read_file(dir / "encoder.json"));
    EncoderConfig cfg;
    cfg.d_model = header.at("d_model").get<int>();
    cfg.n_heads = header.at("n_heads").get<int>();
    cfg.n_layers = header.at("n_layers").get<int>();
    cfg.ffn_dim = header.at("ffn_dim").get<int>();
    cfg.max_len = header.at("max_len").get<int>();
    EncoderModel model(cfg, header.at("vocabulary").get<std::vector<std::string>>(), 0);
    auto values = io::decode_f64_array(io::read_file(dir / "encoder.bin"));
    if (values.size() != model.params_.size())
      throw DataError("encoder.bin holds " + std::to_string(values.size()) +
                      " parameters, expected " + std::to_string(model.params_.size()));
    model.params_ = std::move(values);
    return model;
  } catch (const json::exception& e) {
    throw DataError("encoder.json in " + dir.string() + ": " + e.what());
  }
}

const char* to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::TrueLabels: return "true_labels";
    case LabelMode::ShuffledLabels: return "shuffled_labels";
    case LabelMode::None: return "none";
  }
  return "?";
}

LabelMode parse_label_mode(const std::string& text) {
  if (text == "true_labels") return LabelMode::TrueLabels;
  if (text == "shuffled_labels") return LabelMode::ShuffledLabels;
  if (text == "none") return LabelMode::None;
  throw ConfigError("unknown label mode '" + text + "'");
}

ClassifierMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("prediction and label counts differ");
  if (predicted.empty()) throw DataError("cannot evaluate a classifier on an empty corpus");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++correct;
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] == 0) ++fp;
    if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  ClassifierMetrics m;
  m.n = predicted.size();
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  return m;
}

ClassifierMetrics evaluate_classifier(const EncoderModel& model, const Corpus& corpus) {
  if (corpus.size() == 0) throw DataError("cannot evaluate a classifier on an empty corpus");
  std::vector<int> predicted, truth;
  for (const auto& doc : corpus.documents()) {
    const auto ids = model.token_ids(doc.tokens);
    predicted.push_back(model.logit(ids) >= 0.0 ? 1 : 0);  // sigmoid >= 0.5
    truth.push_back(doc.side == Side::Liberal ? 1 : 0);
  }
  return classification_metrics(predicted, truth);
}

std::vector<Side> shuffled_labels(const Corpus& corpus, std::uint64_t seed) {
  std::vector<Side> labels;
  labels.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) labels.push_back(doc.side);
  Rng rng(seed ^ 0x5eed'1abe'15ULL);
  rng.shuffle(labels);
  return labels;
}

TrainResult train_partisanship(const EncoderModel& initial, const Corpus& train,
                               const Corpus& validation, const TrainConfig& tc) {
  if (!(tc.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (tc.weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (tc.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (tc.epochs < 0) throw ConfigError("epochs must be non-negative");

  TrainResult result{initial, {}, 0, false};
  if (tc.label_mode == LabelMode::None) return result;
  if (train.size() == 0) throw DataError("training corpus is empty");

  std::vector<Side> sides;
  if (tc.label_mode == LabelMode::ShuffledLabels) {
    sides = shuffled_labels(train, tc.seed);
  } else {
    for (const auto& doc : train.documents()) sides.push_back(doc.side);
  }
  const auto n_lib = std::count(sides.begin(), sides.end(), Side::Liberal);
  if (n_lib == 0 || n_lib == static_cast<long>(sides.size()))
    throw DataError("single-class training set: all " + std::to_string(sides.size()) +
                    " documents are " + to_string(sides.front()));

  EncoderModel& model = result.model;
  std::vector<std::vector<int>> ids;
  std::vector<double> targets;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].empty()) throw DataError("training document '" + train[i].id + "' has no tokens");
    ids.push_back(model.token_ids(train[i].tokens));
    targets.push_back(side_target(sides[i]));
  }
  const Corpus& val = validation.size() > 0 ? validation : train;
  result.validated_on_train = validation.size() == 0;

  auto& params = model.parameters();
  const std::size_t P = params.size();
  std::vector<double> decay_mask(P, 0.0);
  for (const auto& b : model.blocks())
    if (b.decay) std::fill_n(decay_mask.begin() + b.offset, b.size, 1.0);
  std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0), best = params;
  double best_f1 = -1.0;
  long step = 0;

  Rng rng(tc.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto fail = [&](int epoch, std::size_t doc, const std::string& detail) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epoch << " on document '" << train[doc].id
        << "' (learning rate " << tc.learning_rate << "): " << detail;
    throw NumericError(msg.str());
  };
  // Runs one loss evaluation and converts numerical breakdown into an error
  // naming the epoch and document.
  auto guarded = [&](int epoch, std::size_t doc, auto&& fn) {
    double loss;
    try {
      loss = fn();
    } catch (const NumericError& e) {
      fail(epoch, doc, e.what());
    }
    if (!std::isfinite(loss)) fail(epoch, doc, "loss " + std::to_string(loss));
    return loss;
  };

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        guarded(epoch, i, [&] { return model.loss_and_gradient(ids[i], targets[i], grad, inv); });
      }
      ++step;
      const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < P; ++k) {
        m1[k] = tc.beta1 * m1[k] + (1.0 - tc.beta1) * grad[k];
        m2[k] = tc.beta2 * m2[k] + (1.0 - tc.beta2) * grad[k] * grad[k];
        const double update = (m1[k] / c1) / (std::sqrt(m2[k] / c2) + tc.eps);
        params[k] -= tc.learning_rate * (update + tc.weight_decay * decay_mask[k] * params[k]);
      }
    }
    EpochMetrics em;
    em.epoch = epoch;
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      total += guarded(epoch, i, [&] { return model.loss(ids[i], targets[i]); });
    }
    em.train_loss = total / static_cast<double>(ids.size());
    em.validation = evaluate_classifier(model, val);
    result.history.push_back(em);
    if (em.validation.f1 > best_f1) {
      best_f1 = em.validation.f1;
      best = params;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch > 0) params = best;
  return result;
}

std::pair<Corpus, Corpus> split_by_topicality(const Corpus& corpus, std::span<const double> theta,
                                              std::size_t num_topics, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("topicality threshold must lie in (0, 1)");
  if (num_topics == 0 || theta.size() != corpus.size() * num_topics)
    throw DataError("theta has " + std::to_string(theta.size()) + " entries for " +
                    std::to_string(corpus.size()) + " documents x " + std::to_string(num_topics) +
                    " topics");
  std::vector<Document> train, validation;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto row = theta.subspan(i * num_topics, num_topics);
    const double mx = *std::max_element(row.begin(), row.end());
    (mx >= threshold ? train : validation).push_back(corpus[i]);
  }
  return {Corpus(std::move(train)), Corpus(std::move(validation))};
}

ContextualEncoding encode(const EncoderModel& model, const Document& doc) {
  if (doc.empty()) throw DataError("cannot encode empty document '" + doc.id + "'");
  const auto ids = model.token_ids(doc.tokens);
  const ForwardTrace tr = model.forward(ids);
  const std::size_t d = model.config().d_model;
  ContextualEncoding enc;
  enc.doc_id = doc.id;
  enc.dim = d;
  enc.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + static_cast<long>(ids.size() - 1));
  enc.pooled.assign(tr.out.begin(), tr.out.begin() + static_cast<long>(d));
  enc.token_vectors.assign(tr.out.begin() + static_cast<long>(d), tr.out.end());
  return enc;
}

}  // namespace pacte
