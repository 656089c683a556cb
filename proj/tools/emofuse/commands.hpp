#pragma once

#include <optional>
#include <string>
#include <vector>

namespace emofuse::cli {

struct GlobalOptions {
  std::string config;
  std::optional<long long> seed;
  std::string seeds;
  std::string variant;
  std::string device;
  std::string output;
};

struct FeaturizeOptions {
  std::vector<std::string> splits;
  bool fused = false;
  std::string run_dir;
};

struct EvaluateOptions {
  std::string run_dir;
  std::string split = "validation";
};

struct PredictOptions {
  std::string run_dir;
  std::string input;
  std::string out;
};

struct ReportOptions {
  std::vector<std::string> run_dirs;
};

int cmd_prepare(const GlobalOptions& g);
int cmd_featurize(const GlobalOptions& g, const FeaturizeOptions& o);
int cmd_train(const GlobalOptions& g);
int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o);
int cmd_predict(const GlobalOptions& g, const PredictOptions& o);
int cmd_report(const GlobalOptions& g, const ReportOptions& o);

}  // namespace emofuse::cli
