#include "emofuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

const char* const kParamsFile = "params.safetensors";
const char* const kVocabFile = "ewe_vocab.txt";

}  // namespace

// ---------------------------------------------------------------- variants / configs

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::roberta_ewe: return "roberta_ewe";
    case Variant::roberta_nrc_ewe: return "roberta_nrc_ewe";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorKind::usage,
              "unknown variant '" + std::string(name) + "' (expected vanilla, roberta_ewe or roberta_nrc_ewe)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants{Variant::vanilla, Variant::roberta_ewe, Variant::roberta_nrc_ewe};
  return variants;
}

bool uses_ewe(Variant v) { return v != Variant::vanilla; }
bool uses_nrc(Variant v) { return v == Variant::roberta_nrc_ewe; }

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error(ErrorKind::config, "train.lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::config, "train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw Error(ErrorKind::config, "train.weight_decay must be non-negative");
  if (batch_size < 1) throw Error(ErrorKind::config, "train.batch_size must be positive");
  if (patience < 1) throw Error(ErrorKind::config, "train.patience must be >= 1");
  if (max_epochs < 1) throw Error(ErrorKind::config, "train.max_epochs must be positive");
  if (seeds.empty()) throw Error(ErrorKind::config, "train.seeds must not be empty");
}

FusionDims fusion_dims(Variant v, int projection_dim, int cnn_dim) {
  return FusionDims{projection_dim, uses_ewe(v) ? cnn_dim : 0, uses_nrc(v) ? static_cast<int>(kNrcEmotions) : 0};
}

// ---------------------------------------------------------------- examples

std::vector<PreparedExample> prepare_examples(const DatasetSplit& split, const std::vector<TokenSequence>& tokens,
                                              const Resources& resources, const ModelSpec& spec,
                                              const PreprocessOptions& preprocess) {
  if (tokens.size() != split.essays.size()) {
    throw Error(ErrorKind::dimension, "split '" + split.name + "' has " + std::to_string(split.essays.size()) +
                                          " essays but " + std::to_string(tokens.size()) + " token sequences");
  }
  if (!resources.encoder) throw Error(ErrorKind::config, "a transformer encoder is required");
  std::vector<PreparedExample> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Essay& essay = split.essays[i];
    PreparedExample ex;
    ex.id = essay.id;
    ex.label = essay.gold_label;
    const std::string text = spec.encoder_uses_filtered_text
                                 ? tokens[i].text()
                                 : tokenize_truncate(clean_text(essay.raw_text), preprocess.max_len).text();
    ex.subword_ids = resources.encoder->token_ids(text);
    if (spec.encoder.freeze_encoder) ex.cls = resources.encoder->encode_ids(ex.subword_ids);
    if (resources.embeddings) ex.ewe_rows = resources.embeddings->rows_of(tokens[i]);
    if (resources.lexicon) ex.nrc = to_vector(score_essay(tokens[i], *resources.lexicon));
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------- HybridModel

HybridModel::HybridModel(const ModelSpec& spec, const Resources& resources) : spec_(spec), cnn_(spec.cnn) {
  spec_.encoder.validate();
  if (!resources.encoder) throw Error(ErrorKind::config, "a transformer encoder is required");
  if (spec_.num_labels < 1) throw Error(ErrorKind::config, "label set is empty");
  if (spec_.encoder.freeze_encoder) {
    frozen_encoder_ = resources.encoder;
  } else {
    tuned_encoder_ = std::make_shared<TransformerEncoder>(*resources.encoder);
    tuned_encoder_->model().set_trainable(true);
  }
  projection_ = Projection(resources.encoder->hidden_size(), spec_.encoder.projection_dim, spec_.encoder.dropout_p);
  if (uses_ewe(spec_.variant)) {
    if (!resources.embeddings) {
      throw Error(ErrorKind::config, "variant " + std::string(to_string(spec_.variant)) + " requires EWE embeddings");
    }
    if (resources.embeddings->dim() != spec_.cnn.embed_dim) {
      throw Error(ErrorKind::dimension, "embedding dimension " + std::to_string(resources.embeddings->dim()) +
                                            " does not match cnn.embed_dim " + std::to_string(spec_.cnn.embed_dim));
    }
    embeddings_ = std::make_shared<EmbeddingMatrix>(*resources.embeddings);
    embeddings_->table.trainable = !spec_.freeze_embeddings;
  }
  if (uses_nrc(spec_.variant) && !resources.lexicon) {
    throw Error(ErrorKind::config, "variant " + std::string(to_string(spec_.variant)) + " requires the NRC lexicon");
  }
  head_ = ClassificationHead(dims().total(), spec_.num_labels);
}

FusionDims HybridModel::dims() const {
  return fusion_dims(spec_.variant, spec_.encoder.projection_dim, spec_.cnn.output_dim());
}

void HybridModel::init(long long seed) {
  Rng rng(static_cast<std::uint64_t>(seed), kInitStream);
  projection_.init(rng);
  cnn_.init(rng);
  head_.init(rng);
}

Vector HybridModel::fused(const PreparedExample& ex, Mode mode, Rng* dropout_rng, Trace* trace) const {
  Rng* active_rng = mode == Mode::train ? dropout_rng : nullptr;
  Vector cls;
  if (tuned_encoder_) {
    const Mat<float> hidden =
        tuned_encoder_->model().forward(ex.subword_ids, trace ? &trace->encoder : nullptr, active_rng);
    cls = hidden.row(0).transpose().cast<double>();
  } else if (ex.cls.size() > 0) {
    cls = ex.cls;
  } else {
    cls = frozen_encoder_->encode_ids(ex.subword_ids);
  }

  FeatureBundle bundle;
  bundle.r = projection_.forward(cls, mode, active_rng, trace ? &trace->projection : nullptr);
  if (uses_ewe(spec_.variant)) {
    const EssayMatrix m = rows_to_matrix(ex.ewe_rows, *embeddings_, spec_.cnn.seq_len);
    bundle.c = cnn_.forward(m, trace ? &trace->cnn : nullptr);
    if (trace != nullptr) trace->ewe_rows = ex.ewe_rows;
  }
  if (uses_nrc(spec_.variant)) {
    if (ex.nrc.size() != static_cast<Eigen::Index>(kNrcEmotions)) {
      throw Error(ErrorKind::config, "example '" + ex.id + "' has no NRC vector; the lexicon was not loaded");
    }
    bundle.n = ex.nrc;
  }
  Vector f = fuse(bundle, dims());
  if (trace != nullptr) trace->fused = f;
  return f;
}

Vector HybridModel::logits(const PreparedExample& ex, Mode mode, Rng* dropout_rng, Trace* trace) const {
  return head_.logits(fused(ex, mode, dropout_rng, trace));
}

ClassDistribution HybridModel::predict_proba(const PreparedExample& ex) const {
  return ClassDistribution{softmax(logits(ex, Mode::eval))};
}

void HybridModel::backward(const Trace& trace, const Vector& d_logits) {
  const Vector d_fused = head_.backward(trace.fused, d_logits);
  const FusionDims d = dims();
  const Vector d_cls = projection_.backward(trace.projection, d_fused.segment(0, d.r));
  if (tuned_encoder_) {
    const auto tokens = static_cast<Eigen::Index>(trace.encoder.ids.size());
    Mat<float> d_hidden = Mat<float>::Zero(tokens, tuned_encoder_->hidden_size());
    d_hidden.row(0) = d_cls.transpose().cast<float>();
    tuned_encoder_->model().backward(trace.encoder, d_hidden);
  }
  if (uses_ewe(spec_.variant)) {
    const Matrix d_matrix = cnn_.backward(trace.cnn, d_fused.segment(d.r, d.c));
    if (embeddings_->table.has_grad()) {
      for (std::size_t i = 0; i < trace.ewe_rows.size(); ++i) {
        if (trace.ewe_rows[i] != 0) {
          embeddings_->table.grad.row(trace.ewe_rows[i]) += d_matrix.row(static_cast<Eigen::Index>(i));
        }
      }
    }
  }
}

std::vector<Param<double>*> HybridModel::double_params() {
  std::vector<Param<double>*> out = projection_.params();
  if (uses_ewe(spec_.variant)) {
    for (auto* p : cnn_.params()) out.push_back(p);
    if (embeddings_->table.trainable) out.push_back(&embeddings_->table);
  }
  for (auto* p : head_.params()) out.push_back(p);
  return out;
}

std::vector<Param<float>*> HybridModel::float_params() {
  if (!tuned_encoder_) return {};
  std::vector<Param<float>*> out;
  for (auto* p : tuned_encoder_->model().params()) {
    if (p->trainable) out.push_back(p);
  }
  return out;
}

void HybridModel::zero_grad() {
  for (auto* p : double_params()) p->zero_grad();
  for (auto* p : float_params()) p->zero_grad();
}

void HybridModel::save_parameters(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  SafeTensorsWriter writer;
  auto& self = const_cast<HybridModel&>(*this);
  for (auto* p : self.projection_.params()) writer.add(p->name, p->value);
  for (auto* p : self.head_.params()) writer.add(p->name, p->value);
  if (uses_ewe(spec_.variant)) {
    for (auto* p : self.cnn_.params()) writer.add(p->name, p->value);
    writer.add(embeddings_->table.name, embeddings_->table.value);
    std::ofstream vocab(dir / kVocabFile);
    if (!vocab) throw Error(ErrorKind::io, "cannot write " + (dir / kVocabFile).string());
    for (const auto& w : embeddings_->vocab()) vocab << w << '\n';
  }
  if (tuned_encoder_) tuned_encoder_->model().save(writer, "encoder.");
  writer.set_metadata("variant", std::string(to_string(spec_.variant)));
  writer.write(dir / kParamsFile);
}

void check_checkpoint(const std::filesystem::path& dir, const ModelSpec& spec) {
  const auto tensors = SafeTensors::open(dir / kParamsFile);
  if (!tensors.contains("head.weight")) throw Error(ErrorKind::format, "checkpoint " + dir.string() + " has no head");
  const auto& shape = tensors.entry("head.weight").shape;
  const std::int64_t stored_in = shape.size() == 2 ? shape[1] : shape[0];
  const std::int64_t stored_out = shape.size() == 2 ? shape[0] : 1;
  const int expected = fusion_dims(spec.variant, spec.encoder.projection_dim, spec.cnn.output_dim()).total();
  if (stored_in != expected) {
    std::string stored_variant;
    if (const auto it = tensors.metadata().find("variant"); it != tensors.metadata().end()) {
      stored_variant = " (variant " + it->second + ")";
    }
    throw Error(ErrorKind::dimension, "head input size mismatch: checkpoint" + stored_variant + " expects " +
                                          std::to_string(stored_in) + " fused features but variant " +
                                          std::string(to_string(spec.variant)) + " produces " +
                                          std::to_string(expected));
  }
  if (stored_out != spec.num_labels) {
    throw Error(ErrorKind::dimension, "checkpoint head has " + std::to_string(stored_out) + " classes, label set has " +
                                          std::to_string(spec.num_labels));
  }
}

std::shared_ptr<EmbeddingMatrix> load_checkpoint_embeddings(const std::filesystem::path& dir) {
  const auto tensors = SafeTensors::open(dir / kParamsFile);
  if (!tensors.contains("ewe.table")) throw Error(ErrorKind::data, "checkpoint " + dir.string() + " has no EWE table");
  std::ifstream in(dir / kVocabFile);
  if (!in) throw Error(ErrorKind::io, "cannot open " + (dir / kVocabFile).string());
  std::vector<std::string> vocab;
  for (std::string line; std::getline(in, line);) vocab.push_back(line);
  return std::make_shared<EmbeddingMatrix>(
      EmbeddingMatrix::from_table(std::move(vocab), tensors.matrix<double>("ewe.table")));
}

void HybridModel::load_parameters(const std::filesystem::path& dir) {
  const auto tensors = SafeTensors::open(dir / kParamsFile);
  check_checkpoint(dir, spec_);
  for (auto* p : projection_.params()) tensors.load_into(p->name, *p);
  for (auto* p : head_.params()) tensors.load_into(p->name, *p);
  if (uses_ewe(spec_.variant)) {
    for (auto* p : cnn_.params()) tensors.load_into(p->name, *p);
    const bool trainable = embeddings_ ? embeddings_->table.trainable : false;
    embeddings_ = load_checkpoint_embeddings(dir);
    embeddings_->table.trainable = trainable;
  }
  if (tensors.contains("encoder.embeddings.word_embeddings.weight")) {
    if (!tuned_encoder_) {
      tuned_encoder_ = std::make_shared<TransformerEncoder>(*frozen_encoder_);
      tuned_encoder_->model().set_trainable(false);
    }
    tuned_encoder_->model().load(tensors, "encoder.");
  }
}

// ---------------------------------------------------------------- history / stopping

std::string TrainingHistory::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j{{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"val_loss", e.val_loss},
                             {"val_accuracy", e.val_accuracy},
                             {"val_macro_f1", e.val_macro_f1}};
    out << j.dump() << '\n';
  }
  return out.str();
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw Error(ErrorKind::config, "patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

TrainingHistory fit(TrainableModel& model, int max_epochs, int patience, const EpochCallback& on_epoch) {
  if (max_epochs < 1) throw Error(ErrorKind::config, "max_epochs must be positive");
  EarlyStopping stopper(patience);
  TrainingHistory history;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    const double train_loss = model.train_epoch(epoch);
    if (!std::isfinite(train_loss)) {
      throw Error(ErrorKind::numeric, "non-finite training loss at epoch " + std::to_string(epoch));
    }
    const EvalResult val = model.validate();
    if (!std::isfinite(val.loss)) {
      throw Error(ErrorKind::numeric, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back({epoch, train_loss, val.loss, val.accuracy, val.macro_f1});
    if (on_epoch) on_epoch(history.epochs.back());
    if (stopper.update(val.loss)) model.save_best();
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  model.restore_best();
  return history;
}

// ---------------------------------------------------------------- evaluation

EvalResult evaluate_examples(const HybridModel& model, const std::vector<PreparedExample>& examples,
                             std::size_t num_labels) {
  if (examples.empty()) throw Error(ErrorKind::data, "cannot evaluate an empty split");
  ConfusionMatrix confusion(num_labels);
  double loss = 0.0;
  for (const auto& ex : examples) {
    if (!ex.label) throw Error(ErrorKind::data, "cannot evaluate: essay '" + ex.id + "' is unlabeled");
    const Vector logits = model.logits(ex, Mode::eval);
    loss += cross_entropy(logits, *ex.label);
    confusion.add(*ex.label, predict(logits));
  }
  return {loss / static_cast<double>(examples.size()), confusion.accuracy(), confusion.macro_f1()};
}

RunMetrics evaluate(const HybridModel& model, const std::vector<PreparedExample>& examples, std::size_t num_labels,
                    const std::string& split_name) {
  const auto r = evaluate_examples(model, examples, num_labels);
  RunMetrics m;
  m.split = split_name;
  m.accuracy = r.accuracy;
  m.macro_f1 = r.macro_f1;
  m.loss = r.loss;
  return m;
}

// ---------------------------------------------------------------- training

namespace {

class HybridTrainer final : public TrainableModel {
 public:
  HybridTrainer(HybridModel& model, const TrainConfig& config, const std::vector<PreparedExample>& train_set,
                const std::vector<PreparedExample>& val_set, long long seed)
      : model_(model),
        config_(config),
        train_(train_set),
        val_(val_set),
        optimizer_(config.optimizer()),
        shuffle_rng_(static_cast<std::uint64_t>(seed), kShuffleStream),
        dropout_rng_(static_cast<std::uint64_t>(seed), kDropoutStream) {
    optimizer_.add_all(model_.double_params());
    optimizer_.add_all(model_.float_params());
  }

  double train_epoch(int epoch) override {
    const auto order = permutation(train_.size(), shuffle_rng_);
    double total = 0.0;
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      optimizer_.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const PreparedExample& ex = train_[order[i]];
        HybridModel::Trace trace;
        const Vector logits = model_.logits(ex, Mode::train, &dropout_rng_, &trace);
        Vector d_logits;
        const double loss = cross_entropy(logits, *ex.label, &d_logits);
        if (!std::isfinite(loss)) {
          throw Error(ErrorKind::numeric, "non-finite loss on essay '" + ex.id + "' in epoch " + std::to_string(epoch));
        }
        total += loss;
        model_.backward(trace, d_logits * scale);
      }
      optimizer_.step();
    }
    return total / static_cast<double>(train_.size());
  }

  EvalResult validate() override {
    return evaluate_examples(model_, val_, static_cast<std::size_t>(model_.spec().num_labels));
  }

  void save_best() override {
    best_doubles_.clear();
    best_floats_.clear();
    for (auto* p : model_.double_params()) best_doubles_.push_back(p->value);
    for (auto* p : model_.float_params()) best_floats_.push_back(p->value);
  }

  void restore_best() override {
    const auto doubles = model_.double_params();
    const auto floats = model_.float_params();
    if (best_doubles_.size() != doubles.size() || best_floats_.size() != floats.size()) return;
    for (std::size_t i = 0; i < doubles.size(); ++i) doubles[i]->value = best_doubles_[i];
    for (std::size_t i = 0; i < floats.size(); ++i) floats[i]->value = best_floats_[i];
  }

 private:
  HybridModel& model_;
  const TrainConfig& config_;
  const std::vector<PreparedExample>& train_;
  const std::vector<PreparedExample>& val_;
  AdamW optimizer_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  std::vector<Matrix> best_doubles_;
  std::vector<Mat<float>> best_floats_;
};

void require_labeled(const std::vector<PreparedExample>& examples, const char* what) {
  if (examples.empty()) throw Error(ErrorKind::data, std::string(what) + " split is empty");
  for (const auto& ex : examples) {
    if (!ex.label) throw Error(ErrorKind::data, std::string(what) + " essay '" + ex.id + "' is unlabeled");
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const ModelSpec& spec, const Resources& resources,
                  const std::vector<PreparedExample>& train_set, const std::vector<PreparedExample>& val_set,
                  long long seed, const EpochCallback& on_epoch) {
  config.validate();
  require_labeled(train_set, "training");
  require_labeled(val_set, "validation");
  ModelSpec run_spec = spec;
  run_spec.variant = config.variant;
  auto model = std::make_unique<HybridModel>(run_spec, resources);
  model->init(seed);
  HybridTrainer trainer(*model, config, train_set, val_set, seed);
  TrainingHistory history = fit(trainer, config.max_epochs, config.patience, on_epoch);
  return TrainResult{std::move(model), std::move(history)};
}

std::vector<double> train_head(ClassificationHead& head, const std::vector<Vector>& features,
                               const std::vector<LabelIndex>& labels, const AdamWOptions& options, int steps) {
  if (features.size() != labels.size() || features.empty()) {
    throw Error(ErrorKind::dimension, "train_head needs one label per feature vector");
  }
  AdamW optimizer(options);
  optimizer.add_all(head.params());
  const double scale = 1.0 / static_cast<double>(features.size());
  std::vector<double> accuracy_trace;
  for (int step = 0; step < steps; ++step) {
    optimizer.zero_grad();
    for (std::size_t i = 0; i < features.size(); ++i) {
      Vector d_logits;
      cross_entropy(head.logits(features[i]), labels[i], &d_logits);
      head.backward(features[i], d_logits * scale);
    }
    optimizer.step();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) correct += predict(head.logits(features[i])) == labels[i] ? 1 : 0;
    accuracy_trace.push_back(static_cast<double>(correct) / static_cast<double>(features.size()));
  }
  return accuracy_trace;
}

RunMetrics average(const std::vector<RunMetrics>& runs, const std::string& split) {
  RunMetrics mean;
  mean.split = split;
  if (runs.empty()) return mean;
  double epochs = 0.0;
  for (const auto& r : runs) {
    mean.accuracy += r.accuracy;
    mean.macro_f1 += r.macro_f1;
    mean.loss += r.loss;
    epochs += r.epochs_run;
  }
  const auto n = static_cast<double>(runs.size());
  mean.accuracy /= n;
  mean.macro_f1 /= n;
  mean.loss /= n;
  mean.epochs_run = static_cast<int>(std::lround(epochs / n));
  return mean;
}

AblationReport run_ablation(const TrainConfig& base, const ModelSpec& base_spec, const Resources& resources,
                            const std::vector<PreparedExample>& train_set,
                            const std::vector<PreparedExample>& val_set, const std::vector<Variant>& variants,
                            const RunCallback& on_run, const EpochCallback& on_epoch) {
  base.validate();
  AblationReport report;
  const auto labels = static_cast<std::size_t>(base_spec.num_labels);
  for (const auto variant : variants) {
    TrainConfig config = base;
    config.variant = variant;
    AblationRow row;
    row.variant = variant;
    std::vector<RunMetrics> train_metrics;
    std::vector<RunMetrics> val_metrics;
    for (const auto seed : base.seeds) {
      TrainResult result = train(config, base_spec, resources, train_set, val_set, seed, on_epoch);
      SeedRun run;
      run.seed = seed;
      run.history = result.history;
      run.train = evaluate(*result.model, train_set, labels, "train");
      run.validation = evaluate(*result.model, val_set, labels, "validation");
      for (auto* m : {&run.train, &run.validation}) {
        m->seed = seed;
        m->epochs_run = result.history.epochs_run();
      }
      if (on_run) on_run(variant, run, *result.model);
      train_metrics.push_back(run.train);
      val_metrics.push_back(run.validation);
      row.runs.push_back(std::move(run));
    }
    row.mean_train = average(train_metrics, "train");
    row.mean_validation = average(val_metrics, "validation");
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace emofuse
