#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emofuse/bpe_tokenizer.hpp"
#include "emofuse/nn.hpp"
#include "emofuse/safetensors.hpp"

namespace emofuse {

/// Architecture hyperparameters, read from a checkpoint's config.json.
struct RobertaConfig {
  int vocab_size = 50265;
  int hidden_size = 768;
  int num_layers = 12;
  int num_heads = 12;
  int intermediate_size = 3072;
  int max_position_embeddings = 514;
  int type_vocab_size = 1;
  int pad_token_id = 1;
  double layer_norm_eps = 1e-5;
  double hidden_dropout = 0.1;
  double attention_dropout = 0.1;

  static RobertaConfig load(const std::filesystem::path& config_json);
  void validate() const;
  /// Longest id sequence the position table can address.
  int max_sequence_length() const { return max_position_embeddings - pad_token_id - 1; }
};

/// RoBERTa encoder stack (embeddings + post-LN transformer layers, exact
/// GELU) for a single unpadded sequence, with a hand-written backward pass.
/// Parameter names follow the usual checkpoint layout
/// ("embeddings.word_embeddings.weight", "encoder.layer.0...").
template <typename S>
class RobertaEncoder {
 public:
  struct Layer {
    Linear<S> query, key, value, attn_out;
    LayerNorm<S> attn_norm;
    Linear<S> intermediate, output;
    LayerNorm<S> out_norm;
  };

  struct LayerTrace {
    Mat<S> input;
    Mat<S> q, k, v;
    std::vector<Mat<S>> probs;       // per head, before dropout
    std::vector<Mat<S>> prob_masks;  // per head; empty when dropout inactive
    Mat<S> context;
    Mat<S> attn_mask;
    typename LayerNorm<S>::Cache attn_norm;
    Mat<S> attn_normed;
    Mat<S> pre_gelu;
    Mat<S> gelu;
    Mat<S> out_mask;
    typename LayerNorm<S>::Cache out_norm;
  };

  struct Trace {
    std::vector<int> ids;
    typename LayerNorm<S>::Cache embed_norm;
    Mat<S> embed_mask;
    std::vector<LayerTrace> layers;
  };

  explicit RobertaEncoder(const RobertaConfig& config);

  const RobertaConfig& config() const { return config_; }

  /// N(0, stddev) weights, zero biases, unit LayerNorm gains.
  void init_random(Rng& rng, double stddev = 0.02);

  /// Loads every parameter; names may carry a "roberta." prefix and
  /// LayerNorm tensors may use the legacy gamma/beta suffixes.
  void load(const SafeTensors& tensors);
  void load(const SafeTensors& tensors, const std::string& prefix);
  void save(SafeTensorsWriter& writer, const std::string& prefix) const;

  /// Final hidden states (tokens x hidden). Dropout is applied iff
  /// `dropout_rng` is non-null. Throws Error(dimension) for empty or
  /// over-long sequences and out-of-range ids.
  Mat<S> forward(std::span<const int> ids, Trace* trace = nullptr, Rng* dropout_rng = nullptr) const;

  /// Accumulates gradients for dL/d(hidden states).
  void backward(const Trace& trace, const Mat<S>& d_hidden);

  std::vector<Param<S>*> params();
  std::vector<const Param<S>*> params() const;
  void set_trainable(bool trainable);

 private:
  Mat<S> attention(const Layer& layer, const Mat<S>& x, LayerTrace* trace, Rng* rng) const;

  RobertaConfig config_;
  Param<S> word_embeddings_;
  Param<S> position_embeddings_;
  Param<S> token_type_embeddings_;
  LayerNorm<S> embed_norm_;
  std::vector<Layer> layers_;
};

extern template class RobertaEncoder<float>;
extern template class RobertaEncoder<double>;

struct EncoderConfig {
  std::string checkpoint_name = "roberta-base";
  /// Explicit checkpoint directory; required when offline mode is set.
  std::string local_path;
  int max_subword_len = 100;
  double dropout_p = 0.2;
  int projection_dim = 768;
  bool freeze_encoder = false;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// True when EMOFUSE_OFFLINE or HF_HUB_OFFLINE is set to a truthy value.
bool offline_mode();

/// Locates a checkpoint directory holding config.json, vocab.json,
/// merges.txt and model.safetensors. Search order: local_path; then (unless
/// offline) checkpoint_name as a directory, $EMOFUSE_MODEL_DIR/<name>, and
/// the Hugging Face hub cache layout (models--org--name/snapshots/<rev>).
/// Throws Error(io) or Error(config).
std::filesystem::path resolve_checkpoint(const EncoderConfig& config);

/// Tokenizer + pretrained encoder; produces the CLS representation.
class TransformerEncoder {
 public:
  TransformerEncoder(RobertaConfig model_config, BpeTokenizer tokenizer, int max_subword_len);

  static std::shared_ptr<TransformerEncoder> load(const std::filesystem::path& checkpoint_dir, int max_subword_len);
  static std::shared_ptr<TransformerEncoder> load(const EncoderConfig& config);

  int hidden_size() const { return model_.config().hidden_size; }
  int max_subword_len() const { return max_subword_len_; }
  const BpeTokenizer& tokenizer() const { return tokenizer_; }
  RobertaEncoder<float>& model() { return model_; }
  const RobertaEncoder<float>& model() const { return model_; }

  std::vector<int> token_ids(std::string_view text) const;

  /// Final-layer vector at the sequence-start position, evaluation mode.
  Vector encode(std::string_view text) const;
  Vector encode_ids(std::span<const int> ids) const;

 private:
  RobertaEncoder<float> model_;
  BpeTokenizer tokenizer_;
  int max_subword_len_;
};

/// Linear -> tanh -> dropout over the CLS vector.
class Projection {
 public:
  struct Trace {
    Matrix input;
    Matrix activated;
    Matrix mask;
  };

  Projection() = default;
  Projection(int in, int out, double dropout_p);

  int input_dim() const { return layer_.in_features(); }
  int output_dim() const { return layer_.out_features(); }
  double dropout_p() const { return dropout_p_; }

  void init(Rng& rng) { layer_.init_default(rng); }
  Vector forward(const Vector& r, Mode mode, Rng* dropout_rng = nullptr, Trace* trace = nullptr) const;
  /// Accumulates parameter gradients; returns dL/dr.
  Vector backward(const Trace& trace, const Vector& d_out);

  std::vector<Param<double>*> params() { return layer_.params(); }
  Linear<double>& linear() { return layer_; }

 private:
  Linear<double> layer_;
  double dropout_p_ = 0.0;
};

}  // namespace emofuse
