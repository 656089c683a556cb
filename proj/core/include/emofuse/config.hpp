#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emofuse/corpus.hpp"
#include "emofuse/encoder.hpp"
#include "emofuse/ewe.hpp"
#include "emofuse/preprocess.hpp"
#include "emofuse/training.hpp"

namespace emofuse {

struct PathConfig {
  std::string train;
  std::string validation;
  std::string test;
  std::string nrc_lexicon;
  std::string embeddings;
  std::string stopwords;
  std::string checkpoint_dir;
  std::string output_dir = "out";

  bool operator==(const PathConfig&) const = default;
};

/// Whole-run configuration. Relative paths are resolved against the
/// directory of the file they were loaded from.
struct AppConfig {
  PathConfig paths;
  std::vector<std::string> labels = LabelSet::default_set().labels();
  TsvColumns columns;
  PreprocessOptions preprocess;
  EncoderConfig encoder;
  CnnConfig cnn;
  bool freeze_embeddings = true;
  bool encoder_uses_filtered_text = true;
  TrainConfig train;
  std::string device = "cpu";

  /// Throws Error(config) on out-of-range values or an unsupported device.
  void validate() const;

  LabelSet label_set() const { return LabelSet(labels); }
  ModelSpec model_spec() const;

  /// Unknown keys are rejected so typos do not silently fall back to defaults.
  static AppConfig load(const std::filesystem::path& path);
  static AppConfig parse(const std::string& yaml, const std::filesystem::path& base_dir = {});
  std::string to_yaml() const;
  void save(const std::filesystem::path& path) const;

  bool operator==(const AppConfig&) const = default;
};

std::vector<long long> parse_seed_list(const std::string& csv);

}  // namespace emofuse
