#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "emofuse/error.hpp"

namespace {

int exit_code(emofuse::ErrorKind kind) {
  switch (kind) {
    case emofuse::ErrorKind::usage: return 2;
    case emofuse::ErrorKind::config: return 3;
    case emofuse::ErrorKind::io: return 4;
    case emofuse::ErrorKind::format: return 5;
    case emofuse::ErrorKind::data: return 6;
    case emofuse::ErrorKind::dimension: return 7;
    case emofuse::ErrorKind::numeric: return 8;
  }
  return 1;
}

void fail_line(const std::string& kind, std::string msg) {
  for (auto& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error[" << kind << "]: " << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  using namespace emofuse::cli;

  CLI::App app{"Hybrid transformer + lexicon + embedding emotion classifier"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  GlobalOptions g;
  long long seed = 0;
  app.add_option("--config", g.config, "YAML config file");
  auto* seed_opt = app.add_option("--seed", seed, "Single training seed (overrides train.seeds)");
  app.add_option("--seeds", g.seeds, "Comma-separated training seeds");
  app.add_option("--variant", g.variant, "vanilla | roberta_ewe | roberta_nrc_ewe (train also accepts 'all')");
  app.add_option("--device", g.device, "Compute device (cpu)");
  app.add_option("--output", g.output, "Output directory (overrides paths.output_dir)");
  app.fallthrough();

  auto* prepare = app.add_subcommand("prepare", "Clean and cache the dataset splits, write class distributions");

  FeaturizeOptions feat;
  auto* featurize = app.add_subcommand("featurize", "Write NRC vectors, the embedding subset and fused vectors");
  featurize->add_option("--split", feat.splits, "Split(s) to featurize (default: all configured)");
  featurize->add_flag("--fused", feat.fused, "Also dump fused feature vectors");
  featurize->add_option("--run", feat.run_dir, "Checkpoint directory used for --fused");

  auto* train = app.add_subcommand("train", "Train the configured variant once per seed");

  EvaluateOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a labeled split");
  evaluate->add_option("--run", eval.run_dir, "Checkpoint directory")->required();
  evaluate->add_option("--split", eval.split, "train | validation | test")->capture_default_str();

  PredictOptions pred;
  auto* predict = app.add_subcommand("predict", "Write one predicted label per input row");
  predict->add_option("--run,--checkpoint", pred.run_dir, "Checkpoint directory")->required();
  predict->add_option("--input", pred.input, "Essay TSV (default: paths.test)");
  predict->add_option("--out", pred.out, "Prediction file (default: <output>/predictions.txt)");

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "Seed-averaged comparison table over run directories");
  report->add_option("runs", rep.run_dirs, "Run directories or their parents (default: <output>/runs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line("usage", e.what());
    return 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*prepare) return cmd_prepare(g);
    if (*featurize) return cmd_featurize(g, feat);
    if (*train) return cmd_train(g);
    if (*evaluate) return cmd_evaluate(g, eval);
    if (*predict) return cmd_predict(g, pred);
    if (*report) return cmd_report(g, rep);
  } catch (const emofuse::Error& e) {
    fail_line(std::string(emofuse::to_string(e.kind())), e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    fail_line("io", e.what());
    return exit_code(emofuse::ErrorKind::io);
  } catch (const std::bad_alloc&) {
    fail_line("resource", "out of memory");
    return 1;
  } catch (const std::exception& e) {
    fail_line("internal", e.what());
    return 1;
  }
  return 2;
}
