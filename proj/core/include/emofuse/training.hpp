#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emofuse/corpus.hpp"
#include "emofuse/encoder.hpp"
#include "emofuse/ewe.hpp"
#include "emofuse/fusion.hpp"
#include "emofuse/metrics.hpp"
#include "emofuse/nrc.hpp"
#include "emofuse/optim.hpp"
#include "emofuse/preprocess.hpp"

namespace emofuse {

/// Ablation variants: transformer only, + EWE CNN feature, + NRC vector.
enum class Variant { vanilla, roberta_ewe, roberta_nrc_ewe };

std::string_view to_string(Variant v);
/// Throws Error(usage) for unknown names.
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();
bool uses_ewe(Variant v);
bool uses_nrc(Variant v);

struct TrainConfig {
  Variant variant = Variant::roberta_nrc_ewe;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  int batch_size = 64;
  int patience = 10;
  int max_epochs = 100;
  std::vector<long long> seeds{13, 42, 2022};

  void validate() const;
  AdamWOptions optimizer() const { return {lr, beta1, beta2, 1e-8, weight_decay}; }
  bool operator==(const TrainConfig&) const = default;
};

/// Everything that fixes the model's shape.
struct ModelSpec {
  Variant variant = Variant::roberta_nrc_ewe;
  EncoderConfig encoder;
  CnnConfig cnn;
  bool freeze_embeddings = true;
  /// Feed the stopword-filtered token text to the transformer (otherwise the
  /// cleaned text before stopword removal, truncated to the same length).
  bool encoder_uses_filtered_text = true;
  int num_labels = 7;
};

FusionDims fusion_dims(Variant v, int projection_dim, int cnn_dim);

/// Shared read-only inputs. `embeddings` is needed by EWE variants and
/// `lexicon` by the full variant.
struct Resources {
  std::shared_ptr<const TransformerEncoder> encoder;
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  std::shared_ptr<const NrcLexicon> lexicon;
};

/// Model-independent per-essay inputs.
struct PreparedExample {
  std::string id;
  std::vector<int> subword_ids;
  std::vector<int> ewe_rows;
  Vector nrc;
  /// Final-layer CLS vector, cached when the encoder is frozen.
  Vector cls;
  std::optional<LabelIndex> label;
};

std::vector<PreparedExample> prepare_examples(const DatasetSplit& split, const std::vector<TokenSequence>& tokens,
                                              const Resources& resources, const ModelSpec& spec,
                                              const PreprocessOptions& preprocess = {});

/// Transformer CLS -> projection, EWE CNN branch, NRC vector, fused into a
/// single linear softmax head.
class HybridModel {
 public:
  struct Trace {
    RobertaEncoder<float>::Trace encoder;
    Projection::Trace projection;
    CnnBranch::Trace cnn;
    std::vector<int> ewe_rows;
    Vector fused;
  };

  /// Throws Error(config) when the variant's resources are missing.
  HybridModel(const ModelSpec& spec, const Resources& resources);

  const ModelSpec& spec() const { return spec_; }
  FusionDims dims() const;

  /// Seeds projection, CNN and head initialisation.
  void init(long long seed);

  /// Fused [R; C; N] vector for one example.
  Vector fused(const PreparedExample& ex, Mode mode, Rng* dropout_rng = nullptr, Trace* trace = nullptr) const;
  Vector logits(const PreparedExample& ex, Mode mode, Rng* dropout_rng = nullptr, Trace* trace = nullptr) const;
  ClassDistribution predict_proba(const PreparedExample& ex) const;
  void backward(const Trace& trace, const Vector& d_logits);

  std::vector<Param<double>*> double_params();
  std::vector<Param<float>*> float_params();
  void zero_grad();

  /// Writes params.safetensors (+ ewe_vocab.txt for EWE variants).
  void save_parameters(const std::filesystem::path& dir) const;
  /// Restores parameters written by save_parameters. Throws
  /// Error(dimension) naming both sizes when the stored head does not match
  /// this model's fused width.
  void load_parameters(const std::filesystem::path& dir);

  Projection& projection() { return projection_; }
  CnnBranch& cnn() { return cnn_; }
  ClassificationHead& head() { return head_; }
  const EmbeddingMatrix* embeddings() const { return embeddings_.get(); }

 private:
  ModelSpec spec_;
  std::shared_ptr<const TransformerEncoder> frozen_encoder_;
  std::shared_ptr<TransformerEncoder> tuned_encoder_;
  std::shared_ptr<EmbeddingMatrix> embeddings_;
  Projection projection_;
  CnnBranch cnn_;
  ClassificationHead head_;
};

/// Throws Error(dimension) naming both sizes when the checkpoint in `dir` was
/// trained with a head that does not fit `spec`.
void check_checkpoint(const std::filesystem::path& dir, const ModelSpec& spec);

/// Reads the embedding vocabulary/table stored next to a checkpoint.
std::shared_ptr<EmbeddingMatrix> load_checkpoint_embeddings(const std::filesystem::path& dir);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  int epochs_run() const { return static_cast<int>(epochs.size()); }
  /// One JSON object per epoch per line.
  std::string to_jsonl() const;
};

/// Patience counter over the best validation loss so far; only a strict
/// decrease counts as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records one epoch; returns true when it set a new best.
  bool update(double val_loss);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
  double best_loss_;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// What the epoch loop drives; lets the stopping logic run against stubs.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual double train_epoch(int epoch) = 0;
  virtual EvalResult validate() = 0;
  virtual void save_best() = 0;
  virtual void restore_best() = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs epochs until patience is exhausted or max_epochs is reached, then
/// restores the best-validation-loss state. Throws Error(numeric) on a
/// non-finite loss.
TrainingHistory fit(TrainableModel& model, int max_epochs, int patience, const EpochCallback& on_epoch = {});

/// Loss, accuracy and macro F1 of the model on labeled examples.
EvalResult evaluate_examples(const HybridModel& model, const std::vector<PreparedExample>& examples,
                             std::size_t num_labels);

RunMetrics evaluate(const HybridModel& model, const std::vector<PreparedExample>& examples, std::size_t num_labels,
                    const std::string& split_name);

struct TrainResult {
  std::unique_ptr<HybridModel> model;
  TrainingHistory history;
};

/// Mini-batch AdamW on unweighted cross-entropy. The seed fixes
/// initialisation, dropout and the shuffle order; the shuffle stream does
/// not depend on the variant.
TrainResult train(const TrainConfig& config, const ModelSpec& spec, const Resources& resources,
                  const std::vector<PreparedExample>& train_set, const std::vector<PreparedExample>& val_set,
                  long long seed, const EpochCallback& on_epoch = {});

/// Trains only a classification head on precomputed fused vectors
/// (full-batch AdamW). Returns training-set accuracy after each step.
std::vector<double> train_head(ClassificationHead& head, const std::vector<Vector>& features,
                               const std::vector<LabelIndex>& labels, const AdamWOptions& options, int steps);

struct SeedRun {
  long long seed = 0;
  RunMetrics train;
  RunMetrics validation;
  TrainingHistory history;
};

struct AblationRow {
  Variant variant = Variant::vanilla;
  std::vector<SeedRun> runs;
  RunMetrics mean_train;
  RunMetrics mean_validation;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

/// Arithmetic mean of accuracy, macro F1, loss and epochs.
RunMetrics average(const std::vector<RunMetrics>& runs, const std::string& split);

using RunCallback = std::function<void(Variant, const SeedRun&, const HybridModel&)>;

/// Every variant x every seed, identical seeds across variants.
AblationReport run_ablation(const TrainConfig& base, const ModelSpec& base_spec, const Resources& resources,
                            const std::vector<PreparedExample>& train_set,
                            const std::vector<PreparedExample>& val_set, const std::vector<Variant>& variants,
                            const RunCallback& on_run = {}, const EpochCallback& on_epoch = {});

}  // namespace emofuse
