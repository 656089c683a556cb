#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "emofuse/config.hpp"
#include "emofuse/corpus.hpp"
#include "emofuse/encoder.hpp"
#include "emofuse/error.hpp"
#include "emofuse/ewe.hpp"
#include "emofuse/nrc.hpp"
#include "emofuse/preprocess.hpp"
#include "emofuse/training.hpp"

namespace emofuse::testing {

inline std::filesystem::path data_dir() { return EMOFUSE_TEST_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return data_dir() / "fixture"; }
inline std::filesystem::path tiny_roberta_dir() { return data_dir() / "tiny_roberta"; }
inline std::filesystem::path resource_dir() { return EMOFUSE_RESOURCE_DIR; }

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("emofuse-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Kind of the Error thrown by `f`, or nullopt when nothing is thrown.
inline std::optional<ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- oracles

using LexiconRow = std::tuple<std::string, std::string, double>;

/// Double loop over tokens x lexicon rows; knows nothing about NrcLexicon.
inline std::array<double, 6> nrc_oracle(const std::vector<std::string>& tokens, const std::vector<LexiconRow>& rows) {
  static const std::array<std::string, 6> order{"anger", "joy", "sadness", "disgust", "fear", "surprise"};
  std::array<double, 6> out{};
  for (const auto& tok : tokens) {
    for (const auto& [word, emotion, score] : rows) {
      if (word != tok) continue;
      for (std::size_t k = 0; k < order.size(); ++k) {
        if (order[k] == emotion) out[k] += score;
      }
    }
  }
  return out;
}

struct MetricOracle {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> f1;
};

/// Per-class TP/FP/FN by scanning the label vectors directly.
inline MetricOracle metric_oracle(const std::vector<int>& gold, const std::vector<int>& pred, int num_classes) {
  MetricOracle m;
  int correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    m.f1.push_back(f);
    sum += f;
  }
  m.macro_f1 = sum / num_classes;
  return m;
}

/// Largest |analytic - numeric| / max(1, |analytic| + |numeric|) over a
/// sample of entries of `param`, using central differences.
template <typename S>
double max_relative_error(Param<S>& param, const std::function<double()>& loss, int samples, std::mt19937_64& gen,
                          double h = 1e-5) {
  double worst = 0.0;
  std::uniform_int_distribution<Eigen::Index> pick(0, param.value.size() - 1);
  const int n = static_cast<int>(std::min<Eigen::Index>(samples, param.value.size()));
  for (int s = 0; s < n; ++s) {
    const Eigen::Index i = samples >= param.value.size() ? s : pick(gen);
    S& x = param.value.data()[i];
    const S saved = x;
    x = saved + static_cast<S>(h);
    const double up = loss();
    x = saved - static_cast<S>(h);
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = static_cast<double>(param.grad.data()[i]);
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

// ---------------------------------------------------------------- generators

inline std::vector<std::string> random_tokens(std::mt19937_64& gen, const std::vector<std::string>& pool,
                                              std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> word(0, pool.size() - 1);
  std::vector<std::string> out(len(gen));
  for (auto& w : out) w = pool[word(gen)];
  return out;
}

inline std::string random_essay_text(std::mt19937_64& gen, std::size_t words) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789!?.,;'-";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> wl(1, 9);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += std::uniform_int_distribution<int>(0, 4)(gen) == 0 ? "  " : " ";
    const int n = wl(gen);
    bool has_letter = false;
    for (int k = 0; k < n; ++k) {
      const char c = alphabet[ch(gen)];
      has_letter = has_letter || std::isalpha(static_cast<unsigned char>(c));
      out += c;
    }
    if (!has_letter) out += 'x';
  }
  return out;
}

// ---------------------------------------------------------------- early stopping stub

/// Replays a scripted validation-loss sequence.
class ScriptedModel : public TrainableModel {
 public:
  explicit ScriptedModel(std::vector<double> val_losses) : losses_(std::move(val_losses)) {}

  double train_epoch(int epoch) override {
    epochs_ = epoch;
    return 1.0;
  }
  EvalResult validate() override {
    const auto i = static_cast<std::size_t>(epochs_ - 1);
    return {i < losses_.size() ? losses_[i] : losses_.back(), 0.5, 0.5};
  }
  void save_best() override { saved_at_ = epochs_; }
  void restore_best() override { restored_ = saved_at_; }

  int epochs() const { return epochs_; }
  int saved_at() const { return saved_at_; }
  int restored() const { return restored_; }

 private:
  std::vector<double> losses_;
  int epochs_ = 0;
  int saved_at_ = 0;
  int restored_ = 0;
};

// ---------------------------------------------------------------- fixture corpus

struct FixtureData {
  AppConfig config;
  LabelSet labels = LabelSet::default_set();
  DatasetSplit train;
  DatasetSplit validation;
  std::vector<TokenSequence> train_tokens;
  std::vector<TokenSequence> validation_tokens;
  Resources resources;
};

inline FixtureData load_fixture() {
  FixtureData f;
  f.config = AppConfig::load(fixture_dir() / "config.yaml");
  f.labels = f.config.label_set();
  const auto stops = StopwordSet::load(f.config.paths.stopwords);
  f.train = load_dataset(f.config.paths.train, f.labels, "train", f.config.columns);
  f.validation = load_dataset(f.config.paths.validation, f.labels, "validation", f.config.columns);
  for (const auto& e : f.train.essays) f.train_tokens.push_back(preprocess_essay(e.raw_text, stops, f.config.preprocess));
  for (const auto& e : f.validation.essays) {
    f.validation_tokens.push_back(preprocess_essay(e.raw_text, stops, f.config.preprocess));
  }
  f.resources.encoder = TransformerEncoder::load(f.config.encoder);
  f.resources.embeddings = std::make_shared<EmbeddingMatrix>(
      EmbeddingMatrix::build({&f.train_tokens, &f.validation_tokens}, f.config.paths.embeddings, f.config.cnn.embed_dim));
  f.resources.lexicon = std::make_shared<NrcLexicon>(NrcLexicon::load(f.config.paths.nrc_lexicon));
  return f;
}

}  // namespace emofuse::testing
