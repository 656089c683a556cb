#include "emofuse/encoder.hpp"

#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <optional>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

// ---------------------------------------------------------------- config

RobertaConfig RobertaConfig::load(const std::filesystem::path& config_json) {
  std::ifstream in(config_json);
  if (!in) throw Error(ErrorKind::io, "cannot open model config " + config_json.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, config_json.string() + ": " + e.what());
  }
  RobertaConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.num_layers = j.value("num_hidden_layers", c.num_layers);
  c.num_heads = j.value("num_attention_heads", c.num_heads);
  c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
  c.max_position_embeddings = j.value("max_position_embeddings", c.max_position_embeddings);
  c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
  c.pad_token_id = j.value("pad_token_id", c.pad_token_id);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.hidden_dropout = j.value("hidden_dropout_prob", c.hidden_dropout);
  c.attention_dropout = j.value("attention_probs_dropout_prob", c.attention_dropout);
  const auto act = j.value("hidden_act", std::string("gelu"));
  if (act != "gelu") throw Error(ErrorKind::config, "unsupported hidden_act '" + act + "' (only exact gelu)");
  c.validate();
  return c;
}

void RobertaConfig::validate() const {
  if (vocab_size <= 0 || hidden_size <= 0 || num_layers < 0 || num_heads <= 0 || intermediate_size <= 0 ||
      type_vocab_size <= 0 || max_position_embeddings <= pad_token_id + 2) {
    throw Error(ErrorKind::config, "invalid encoder architecture");
  }
  if (hidden_size % num_heads != 0) throw Error(ErrorKind::config, "hidden_size must be divisible by num_heads");
  if (hidden_dropout < 0 || hidden_dropout >= 1 || attention_dropout < 0 || attention_dropout >= 1) {
    throw Error(ErrorKind::config, "encoder dropout must lie in [0, 1)");
  }
}

void EncoderConfig::validate() const {
  if (projection_dim < 1) throw Error(ErrorKind::config, "encoder.projection_dim must be >= 1");
  if (max_subword_len < 2) throw Error(ErrorKind::config, "encoder.max_subword_len must be >= 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorKind::config, "encoder.dropout must lie in [0, 1)");
}

// ---------------------------------------------------------------- encoder

template <typename S>
RobertaEncoder<S>::RobertaEncoder(const RobertaConfig& config)
    : config_(config),
      word_embeddings_("embeddings.word_embeddings.weight", config.vocab_size, config.hidden_size),
      position_embeddings_("embeddings.position_embeddings.weight", config.max_position_embeddings,
                           config.hidden_size),
      token_type_embeddings_("embeddings.token_type_embeddings.weight", config.type_vocab_size, config.hidden_size),
      embed_norm_("embeddings.LayerNorm", config.hidden_size, config.layer_norm_eps) {
  config_.validate();
  const int h = config.hidden_size;
  for (int i = 0; i < config.num_layers; ++i) {
    const std::string p = "encoder.layer." + std::to_string(i) + ".";
    layers_.push_back(Layer{
        Linear<S>(p + "attention.self.query", h, h),
        Linear<S>(p + "attention.self.key", h, h),
        Linear<S>(p + "attention.self.value", h, h),
        Linear<S>(p + "attention.output.dense", h, h),
        LayerNorm<S>(p + "attention.output.LayerNorm", h, config.layer_norm_eps),
        Linear<S>(p + "intermediate.dense", h, config.intermediate_size),
        Linear<S>(p + "output.dense", config.intermediate_size, h),
        LayerNorm<S>(p + "output.LayerNorm", h, config.layer_norm_eps),
    });
  }
}

template <typename S>
std::vector<Param<S>*> RobertaEncoder<S>::params() {
  std::vector<Param<S>*> out{&word_embeddings_, &position_embeddings_, &token_type_embeddings_, &embed_norm_.gamma,
                             &embed_norm_.beta};
  for (auto& l : layers_) {
    for (auto* lin : {&l.query, &l.key, &l.value, &l.attn_out}) {
      out.push_back(&lin->weight);
      out.push_back(&lin->bias);
    }
    out.push_back(&l.attn_norm.gamma);
    out.push_back(&l.attn_norm.beta);
    for (auto* lin : {&l.intermediate, &l.output}) {
      out.push_back(&lin->weight);
      out.push_back(&lin->bias);
    }
    out.push_back(&l.out_norm.gamma);
    out.push_back(&l.out_norm.beta);
  }
  return out;
}

template <typename S>
std::vector<const Param<S>*> RobertaEncoder<S>::params() const {
  auto mutable_params = const_cast<RobertaEncoder*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename S>
void RobertaEncoder<S>::set_trainable(bool trainable) {
  for (auto* p : params()) {
    p->trainable = trainable;
    p->zero_grad();
  }
}

template <typename S>
void RobertaEncoder<S>::init_random(Rng& rng, double stddev) {
  for (auto* p : params()) {
    const bool is_norm = p->name.find("LayerNorm") != std::string::npos;
    const bool is_bias = p->name.ends_with(".bias");
    if (is_norm) {
      p->value.setConstant(is_bias ? S(0) : S(1));
    } else if (is_bias) {
      p->value.setZero();
    } else {
      p->fill_normal(rng, stddev);
    }
  }
}

template <typename S>
void RobertaEncoder<S>::load(const SafeTensors& tensors, const std::string& prefix) {
  for (auto* p : params()) {
    std::string name = prefix + p->name;
    if (!tensors.contains(name) && p->name.find("LayerNorm") != std::string::npos) {
      std::string legacy = name;
      if (legacy.ends_with(".weight")) {
        legacy.replace(legacy.size() - 7, 7, ".gamma");
      } else if (legacy.ends_with(".bias")) {
        legacy.replace(legacy.size() - 5, 5, ".beta");
      }
      if (tensors.contains(legacy)) name = legacy;
    }
    if (!tensors.contains(name)) throw Error(ErrorKind::format, "checkpoint is missing tensor '" + name + "'");
    tensors.load_into(name, *p);
  }
}

template <typename S>
void RobertaEncoder<S>::load(const SafeTensors& tensors) {
  const std::string probe = "embeddings.word_embeddings.weight";
  if (tensors.contains(probe)) {
    load(tensors, "");
  } else if (tensors.contains("roberta." + probe)) {
    load(tensors, "roberta.");
  } else {
    throw Error(ErrorKind::format, "checkpoint has no RoBERTa embedding table");
  }
}

template <typename S>
void RobertaEncoder<S>::save(SafeTensorsWriter& writer, const std::string& prefix) const {
  for (const auto* p : params()) writer.add(prefix + p->name, p->value);
}

template <typename S>
Mat<S> RobertaEncoder<S>::attention(const Layer& layer, const Mat<S>& x, LayerTrace* trace, Rng* rng) const {
  const int heads = config_.num_heads;
  const int head_dim = config_.hidden_size / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(head_dim));
  Mat<S> q = layer.query.forward(x);
  Mat<S> k = layer.key.forward(x);
  Mat<S> v = layer.value.forward(x);
  Mat<S> context(x.rows(), x.cols());
  if (trace != nullptr) {
    trace->probs.resize(static_cast<std::size_t>(heads));
    trace->prob_masks.assign(rng != nullptr ? static_cast<std::size_t>(heads) : 0, Mat<S>());
  }
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * head_dim, head_dim);
    const Mat<S> scores = (q(Eigen::all, cols) * k(Eigen::all, cols).transpose()) * scale;
    Mat<S> probs = softmax_rows(scores);
    Mat<S> used = probs;
    if (rng != nullptr) {
      Mat<S> mask = dropout_mask<S>(probs.rows(), probs.cols(), config_.attention_dropout, *rng);
      used = (probs.array() * mask.array()).matrix();
      if (trace != nullptr) trace->prob_masks[static_cast<std::size_t>(h)] = std::move(mask);
    }
    context(Eigen::all, cols) = used * v(Eigen::all, cols);
    if (trace != nullptr) trace->probs[static_cast<std::size_t>(h)] = std::move(probs);
  }
  if (trace != nullptr) {
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
  }
  Mat<S> out = layer.attn_out.forward(context);
  if (trace != nullptr) trace->context = std::move(context);
  return out;
}

template <typename S>
Mat<S> RobertaEncoder<S>::forward(std::span<const int> ids, Trace* trace, Rng* dropout_rng) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw Error(ErrorKind::dimension, "encoder input is empty");
  if (n > config_.max_sequence_length()) {
    throw Error(ErrorKind::dimension, "encoder input has " + std::to_string(n) + " ids, limit is " +
                                          std::to_string(config_.max_sequence_length()));
  }
  Mat<S> x(n, config_.hidden_size);
  for (Eigen::Index t = 0; t < n; ++t) {
    const int id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= config_.vocab_size) {
      throw Error(ErrorKind::dimension, "token id " + std::to_string(id) + " outside vocabulary");
    }
    x.row(t) = word_embeddings_.value.row(id) +
               position_embeddings_.value.row(config_.pad_token_id + 1 + t) + token_type_embeddings_.value.row(0);
  }
  if (trace != nullptr) {
    trace->ids.assign(ids.begin(), ids.end());
    trace->layers.assign(layers_.size(), LayerTrace{});
  }
  x = embed_norm_.forward(x, trace ? &trace->embed_norm : nullptr);
  if (dropout_rng != nullptr) {
    Mat<S> mask = dropout_mask<S>(x.rows(), x.cols(), config_.hidden_dropout, *dropout_rng);
    x.array() *= mask.array();
    if (trace != nullptr) trace->embed_mask = std::move(mask);
  }

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    LayerTrace* lt = trace ? &trace->layers[li] : nullptr;
    Mat<S> a = attention(layer, x, lt, dropout_rng);
    if (dropout_rng != nullptr) {
      Mat<S> mask = dropout_mask<S>(a.rows(), a.cols(), config_.hidden_dropout, *dropout_rng);
      a.array() *= mask.array();
      if (lt != nullptr) lt->attn_mask = std::move(mask);
    }
    Mat<S> y1 = layer.attn_norm.forward(a + x, lt ? &lt->attn_norm : nullptr);
    Mat<S> pre = layer.intermediate.forward(y1);
    Mat<S> g = gelu_forward(pre);
    Mat<S> o = layer.output.forward(g);
    if (dropout_rng != nullptr) {
      Mat<S> mask = dropout_mask<S>(o.rows(), o.cols(), config_.hidden_dropout, *dropout_rng);
      o.array() *= mask.array();
      if (lt != nullptr) lt->out_mask = std::move(mask);
    }
    Mat<S> y2 = layer.out_norm.forward(o + y1, lt ? &lt->out_norm : nullptr);
    if (lt != nullptr) {
      lt->input = std::move(x);
      lt->attn_normed = std::move(y1);
      lt->pre_gelu = std::move(pre);
      lt->gelu = std::move(g);
    }
    x = std::move(y2);
  }
  return x;
}

template <typename S>
void RobertaEncoder<S>::backward(const Trace& trace, const Mat<S>& d_hidden) {
  const int heads = config_.num_heads;
  const int head_dim = config_.hidden_size / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(head_dim));
  Mat<S> dx = d_hidden;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    Layer& layer = layers_[li];
    const LayerTrace& lt = trace.layers[li];

    // Feed-forward block.
    const Mat<S> dz2 = layer.out_norm.backward(lt.out_norm, dx);
    Mat<S> d_o = dz2;
    if (lt.out_mask.size() > 0) d_o.array() *= lt.out_mask.array();
    const Mat<S> d_g = layer.output.backward(lt.gelu, d_o);
    Mat<S> d_y1 = dz2 + layer.intermediate.backward(lt.attn_normed, gelu_backward(lt.pre_gelu, d_g));

    // Attention block.
    const Mat<S> dz1 = layer.attn_norm.backward(lt.attn_norm, d_y1);
    Mat<S> d_a = dz1;
    if (lt.attn_mask.size() > 0) d_a.array() *= lt.attn_mask.array();
    const Mat<S> d_ctx = layer.attn_out.backward(lt.context, d_a);
    Mat<S> dq(d_ctx.rows(), d_ctx.cols());
    Mat<S> dk(d_ctx.rows(), d_ctx.cols());
    Mat<S> dv(d_ctx.rows(), d_ctx.cols());
    for (int h = 0; h < heads; ++h) {
      const auto cols = Eigen::seqN(h * head_dim, head_dim);
      const Mat<S>& probs = lt.probs[static_cast<std::size_t>(h)];
      const bool masked = !lt.prob_masks.empty();
      const Mat<S> used = masked ? Mat<S>((probs.array() * lt.prob_masks[static_cast<std::size_t>(h)].array()).matrix())
                                 : probs;
      const Mat<S> d_ch = d_ctx(Eigen::all, cols);
      dv(Eigen::all, cols) = used.transpose() * d_ch;
      Mat<S> d_used = d_ch * lt.v(Eigen::all, cols).transpose();
      if (masked) d_used.array() *= lt.prob_masks[static_cast<std::size_t>(h)].array();
      const Mat<S> d_scores = softmax_rows_backward(probs, d_used) * scale;
      dq(Eigen::all, cols) = d_scores * lt.k(Eigen::all, cols);
      dk(Eigen::all, cols) = d_scores.transpose() * lt.q(Eigen::all, cols);
    }
    dx = dz1 + layer.query.backward(lt.input, dq) + layer.key.backward(lt.input, dk) +
         layer.value.backward(lt.input, dv);
  }

  if (trace.embed_mask.size() > 0) dx.array() *= trace.embed_mask.array();
  const Mat<S> d_embed = embed_norm_.backward(trace.embed_norm, dx);
  for (std::size_t t = 0; t < trace.ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (word_embeddings_.has_grad()) word_embeddings_.grad.row(trace.ids[t]) += d_embed.row(row);
    if (position_embeddings_.has_grad()) {
      position_embeddings_.grad.row(config_.pad_token_id + 1 + row) += d_embed.row(row);
    }
    if (token_type_embeddings_.has_grad()) token_type_embeddings_.grad.row(0) += d_embed.row(row);
  }
}

template class RobertaEncoder<float>;
template class RobertaEncoder<double>;

// ---------------------------------------------------------------- checkpoint lookup

namespace {

bool truthy(const char* value) {
  if (value == nullptr) return false;
  const std::string v(value);
  return !v.empty() && v != "0" && v != "false" && v != "FALSE" && v != "no";
}

bool is_checkpoint_dir(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / "config.json");
}

std::filesystem::path hub_cache_root() {
  if (const char* hub = std::getenv("HF_HUB_CACHE"); hub != nullptr && *hub != '\0') return hub;
  if (const char* home = std::getenv("HF_HOME"); home != nullptr && *home != '\0') {
    return std::filesystem::path(home) / "hub";
  }
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return std::filesystem::path(home) / ".cache" / "huggingface" / "hub";
  }
  return {};
}

std::optional<std::filesystem::path> hub_snapshot(const std::string& name) {
  const auto root = hub_cache_root();
  if (root.empty()) return std::nullopt;
  std::string folder = "models--" + name;
  for (std::size_t pos = 0; (pos = folder.find('/', pos)) != std::string::npos;) folder.replace(pos, 1, "--");
  const auto repo = root / folder;
  if (!std::filesystem::is_directory(repo / "snapshots")) return std::nullopt;
  if (std::ifstream ref(repo / "refs" / "main"); ref) {
    std::string revision;
    std::getline(ref, revision);
    if (is_checkpoint_dir(repo / "snapshots" / revision)) return repo / "snapshots" / revision;
  }
  std::vector<std::filesystem::path> snapshots;
  for (const auto& entry : std::filesystem::directory_iterator(repo / "snapshots")) {
    if (is_checkpoint_dir(entry.path())) snapshots.push_back(entry.path());
  }
  if (snapshots.empty()) return std::nullopt;
  std::sort(snapshots.begin(), snapshots.end());
  return snapshots.front();
}

void require_files(const std::filesystem::path& dir) {
  for (const char* file : {"config.json", "vocab.json", "merges.txt"}) {
    if (!std::filesystem::is_regular_file(dir / file)) {
      throw Error(ErrorKind::io, "checkpoint " + dir.string() + " is missing " + file);
    }
  }
  if (!std::filesystem::is_regular_file(dir / "model.safetensors")) {
    if (std::filesystem::is_regular_file(dir / "pytorch_model.bin")) {
      throw Error(ErrorKind::format, "checkpoint " + dir.string() +
                                         " only has pytorch_model.bin; convert it to model.safetensors");
    }
    throw Error(ErrorKind::io, "checkpoint " + dir.string() + " is missing model.safetensors");
  }
}

}  // namespace

bool offline_mode() { return truthy(std::getenv("EMOFUSE_OFFLINE")) || truthy(std::getenv("HF_HUB_OFFLINE")); }

std::filesystem::path resolve_checkpoint(const EncoderConfig& config) {
  if (!config.local_path.empty()) {
    const std::filesystem::path dir(config.local_path);
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorKind::io, "encoder.local_path " + dir.string() + " does not exist");
    }
    require_files(dir);
    return dir;
  }
  if (offline_mode()) {
    throw Error(ErrorKind::config, "offline mode requires encoder.local_path to name a checkpoint directory");
  }
  std::vector<std::filesystem::path> candidates{config.checkpoint_name};
  if (const char* models = std::getenv("EMOFUSE_MODEL_DIR"); models != nullptr && *models != '\0') {
    candidates.push_back(std::filesystem::path(models) / config.checkpoint_name);
  }
  if (auto snap = hub_snapshot(config.checkpoint_name)) candidates.push_back(*snap);
  for (const auto& dir : candidates) {
    if (is_checkpoint_dir(dir)) {
      require_files(dir);
      return dir;
    }
  }
  throw Error(ErrorKind::io, "encoder checkpoint '" + config.checkpoint_name +
                                 "' not found locally; set encoder.local_path or EMOFUSE_MODEL_DIR");
}

// ---------------------------------------------------------------- TransformerEncoder

TransformerEncoder::TransformerEncoder(RobertaConfig model_config, BpeTokenizer tokenizer, int max_subword_len)
    : model_(model_config), tokenizer_(std::move(tokenizer)), max_subword_len_(max_subword_len) {
  if (max_subword_len_ < 2) throw Error(ErrorKind::config, "max subword length must be >= 2");
  if (max_subword_len_ > model_config.max_sequence_length()) {
    throw Error(ErrorKind::config, "max subword length " + std::to_string(max_subword_len_) +
                                       " exceeds the encoder's position table (" +
                                       std::to_string(model_config.max_sequence_length()) + ")");
  }
}

std::shared_ptr<TransformerEncoder> TransformerEncoder::load(const std::filesystem::path& dir, int max_subword_len) {
  require_files(dir);
  auto encoder = std::make_shared<TransformerEncoder>(RobertaConfig::load(dir / "config.json"),
                                                      BpeTokenizer::load(dir / "vocab.json", dir / "merges.txt"),
                                                      max_subword_len);
  encoder->model_.load(SafeTensors::open(dir / "model.safetensors"));
  return encoder;
}

std::shared_ptr<TransformerEncoder> TransformerEncoder::load(const EncoderConfig& config) {
  config.validate();
  return load(resolve_checkpoint(config), config.max_subword_len);
}

std::vector<int> TransformerEncoder::token_ids(std::string_view text) const {
  return tokenizer_.encode(text, static_cast<std::size_t>(max_subword_len_));
}

Vector TransformerEncoder::encode_ids(std::span<const int> ids) const {
  const Mat<float> hidden = model_.forward(ids);
  return hidden.row(0).transpose().cast<double>();
}

Vector TransformerEncoder::encode(std::string_view text) const {
  const auto ids = token_ids(text);
  return encode_ids(ids);
}

// ---------------------------------------------------------------- Projection

Projection::Projection(int in, int out, double dropout_p) : layer_("projection", in, out), dropout_p_(dropout_p) {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorKind::config, "dropout must lie in [0, 1)");
}

Vector Projection::forward(const Vector& r, Mode mode, Rng* dropout_rng, Trace* trace) const {
  if (r.size() != input_dim()) {
    throw Error(ErrorKind::dimension, "projection expects " + std::to_string(input_dim()) + " inputs, got " +
                                          std::to_string(r.size()));
  }
  Matrix x = r.transpose();
  Matrix activated = tanh_forward(layer_.forward(x));
  Matrix out = activated;
  Matrix mask;
  if (mode == Mode::train && dropout_rng != nullptr && dropout_p_ > 0.0) {
    mask = dropout_mask<double>(1, activated.cols(), dropout_p_, *dropout_rng);
    out.array() *= mask.array();
  }
  if (trace != nullptr) {
    trace->input = std::move(x);
    trace->activated = std::move(activated);
    trace->mask = std::move(mask);
  }
  return out.row(0).transpose();
}

Vector Projection::backward(const Trace& trace, const Vector& d_out) {
  Matrix dy = d_out.transpose();
  if (trace.mask.size() > 0) dy.array() *= trace.mask.array();
  const Matrix dx = layer_.backward(trace.input, tanh_backward(trace.activated, dy));
  return dx.row(0).transpose();
}

}  // namespace emofuse
