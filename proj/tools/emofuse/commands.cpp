#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "emofuse/config.hpp"
#include "emofuse/corpus.hpp"
#include "emofuse/error.hpp"
#include "emofuse/ewe.hpp"
#include "emofuse/nrc.hpp"
#include "emofuse/preprocess.hpp"
#include "emofuse/report.hpp"
#include "emofuse/training.hpp"
#include "json.hpp"

namespace emofuse::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSplitNames{"train", "validation", "test"};

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

void apply_overrides(AppConfig& cfg, const GlobalOptions& g) {
  if (!g.variant.empty() && g.variant != "all") cfg.train.variant = parse_variant(g.variant);
  if (!g.seeds.empty()) cfg.train.seeds = parse_seed_list(g.seeds);
  if (g.seed) cfg.train.seeds = {*g.seed};
  if (!g.device.empty()) cfg.device = g.device;
  if (!g.output.empty()) cfg.paths.output_dir = g.output;
}

AppConfig load_config(const GlobalOptions& g, const std::string& fallback = {}) {
  AppConfig cfg;
  if (!g.config.empty()) {
    cfg = AppConfig::load(g.config);
  } else if (!fallback.empty()) {
    cfg = AppConfig::load(fallback);
  }
  apply_overrides(cfg, g);
  cfg.validate();
  return cfg;
}

std::string split_path(const AppConfig& cfg, const std::string& name) {
  if (name == "train") return cfg.paths.train;
  if (name == "validation") return cfg.paths.validation;
  if (name == "test") return cfg.paths.test;
  throw Error(ErrorKind::usage, "unknown split '" + name + "' (expected train, validation or test)");
}

std::string require(const std::string& value, const std::string& key) {
  if (value.empty()) throw Error(ErrorKind::config, key + " is not set");
  return value;
}

struct Corpus {
  LabelSet labels;
  std::map<std::string, DatasetSplit> splits;
  std::map<std::string, std::vector<TokenSequence>> tokens;
};

StopwordSet load_stopwords(const AppConfig& cfg) {
  if (!cfg.preprocess.remove_stopwords) return {};
  return StopwordSet::load(require(cfg.paths.stopwords, "paths.stopwords"));
}

/// Loads `required` splits plus any other configured split when
/// `include_optional` is set, in train/validation/test order.
Corpus load_corpus(const AppConfig& cfg, const std::vector<std::string>& required, bool include_optional) {
  Corpus c{cfg.label_set(), {}, {}};
  const StopwordSet stops = load_stopwords(cfg);
  for (const auto& name : kSplitNames) {
    const bool needed = std::find(required.begin(), required.end(), name) != required.end();
    const std::string path = split_path(cfg, name);
    if (!needed && (!include_optional || path.empty())) continue;
    const auto split = load_dataset(require(path, "paths." + name), c.labels, name, cfg.columns);
    std::vector<TokenSequence> toks;
    toks.reserve(split.size());
    for (const auto& e : split.essays) toks.push_back(preprocess_essay(e.raw_text, stops, cfg.preprocess));
    c.tokens.emplace(name, std::move(toks));
    c.splits.emplace(name, split);
  }
  return c;
}

std::shared_ptr<const EmbeddingMatrix> build_embeddings(const AppConfig& cfg, const Corpus& corpus) {
  std::vector<const std::vector<TokenSequence>*> corpora;
  for (const auto& name : kSplitNames) {
    if (const auto it = corpus.tokens.find(name); it != corpus.tokens.end()) corpora.push_back(&it->second);
  }
  return std::make_shared<EmbeddingMatrix>(
      EmbeddingMatrix::build(corpora, require(cfg.paths.embeddings, "paths.embeddings"), cfg.cnn.embed_dim));
}

std::shared_ptr<const NrcLexicon> load_lexicon(const AppConfig& cfg) {
  return std::make_shared<NrcLexicon>(NrcLexicon::load(require(cfg.paths.nrc_lexicon, "paths.nrc_lexicon")));
}

fs::path run_dir_for(const AppConfig& cfg, Variant v, long long seed) {
  return fs::path(cfg.paths.output_dir) / "runs" / std::string(to_string(v)) / ("seed-" + std::to_string(seed));
}

/// Resources and examples for running a stored checkpoint on one split.
struct CheckpointSession {
  AppConfig cfg;
  ModelSpec spec;
  Resources resources;
  std::unique_ptr<HybridModel> model;
};

CheckpointSession open_checkpoint(const GlobalOptions& g, const std::string& run_dir) {
  const fs::path dir = require(run_dir, "--run");
  if (!fs::exists(dir / "params.safetensors")) {
    throw Error(ErrorKind::io, "no checkpoint (params.safetensors) in " + dir.string());
  }
  CheckpointSession s;
  s.cfg = load_config(g, fs::exists(dir / "config.yaml") ? (dir / "config.yaml").string() : std::string());
  s.spec = s.cfg.model_spec();
  check_checkpoint(dir, s.spec);
  s.resources.encoder = TransformerEncoder::load(s.cfg.encoder);
  if (uses_ewe(s.spec.variant)) s.resources.embeddings = load_checkpoint_embeddings(dir);
  if (uses_nrc(s.spec.variant)) s.resources.lexicon = load_lexicon(s.cfg);
  s.model = std::make_unique<HybridModel>(s.spec, s.resources);
  s.model->load_parameters(dir);
  return s;
}

bool has_data_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open input file " + path.string());
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (header) {
      header = false;
      continue;
    }
    return true;
  }
  return false;
}

}  // namespace

int cmd_prepare(const GlobalOptions& g) {
  const AppConfig cfg = load_config(g);
  const Corpus corpus = load_corpus(cfg, {"train", "validation"}, true);
  const fs::path out(cfg.paths.output_dir);
  for (const auto& name : kSplitNames) {
    if (!corpus.splits.contains(name)) continue;
    const auto& split = corpus.splits.at(name);
    const auto& toks = corpus.tokens.at(name);
    std::ostringstream cache;
    cache << "id\tlabel\toriginal_length\ttokens\n";
    for (std::size_t i = 0; i < split.size(); ++i) {
      const auto& e = split.essays[i];
      cache << e.id << '\t' << (e.gold_label ? corpus.labels.name_of(*e.gold_label) : std::string()) << '\t'
            << toks[i].original_length << '\t' << toks[i].text() << '\n';
    }
    write_file(out / "cache" / (name + ".tsv"), cache.str());
    std::cout << name << ": " << split.size() << " essays\n";
    if (split.labeled()) {
      const auto hist = class_distribution(split, corpus.labels);
      write_file(out / "reports" / (name + "_distribution.json"), distribution_to_json(hist, corpus.labels));
      write_file(out / "reports" / (name + "_distribution.svg"),
                 distribution_to_svg(hist, corpus.labels, "Class distribution (" + name + ")"));
    }
  }
  return 0;
}

int cmd_featurize(const GlobalOptions& g, const FeaturizeOptions& o) {
  const AppConfig cfg = load_config(g);
  std::vector<std::string> wanted = o.splits;
  for (const auto& s : wanted) split_path(cfg, s);
  const Corpus corpus = load_corpus(cfg, wanted, wanted.empty());
  if (corpus.splits.empty()) throw Error(ErrorKind::config, "no dataset splits configured");
  const fs::path out = fs::path(cfg.paths.output_dir) / "features";
  bool wrote = false;

  if (!cfg.paths.nrc_lexicon.empty()) {
    const auto lexicon = load_lexicon(cfg);
    for (const auto& [name, split] : corpus.splits) {
      std::ostringstream tsv;
      tsv << "id";
      for (const auto& e : NrcLexicon::emotion_order()) tsv << '\t' << e;
      tsv << '\n';
      const auto scores = batch_score(corpus.tokens.at(name), *lexicon);
      for (std::size_t i = 0; i < split.size(); ++i) {
        tsv << split.essays[i].id;
        for (const double v : scores[i].scores) tsv << '\t' << num(v);
        tsv << '\n';
      }
      write_file(out / (name + "_nrc.tsv"), tsv.str());
    }
    wrote = true;
  }

  std::shared_ptr<const EmbeddingMatrix> embeddings;
  if (!cfg.paths.embeddings.empty()) {
    embeddings = build_embeddings(cfg, corpus);
    embeddings->save_text(out / "ewe_subset.txt");
    wrote = true;
  }

  if (o.fused) {
    std::unique_ptr<HybridModel> model;
    Resources resources;
    ModelSpec spec;
    if (!o.run_dir.empty()) {
      auto session = open_checkpoint(g, o.run_dir);
      model = std::move(session.model);
      resources = session.resources;
      spec = session.spec;
    } else {
      spec = cfg.model_spec();
      resources.encoder = TransformerEncoder::load(cfg.encoder);
      if (uses_ewe(spec.variant)) resources.embeddings = embeddings ? embeddings : build_embeddings(cfg, corpus);
      if (uses_nrc(spec.variant)) resources.lexicon = load_lexicon(cfg);
      model = std::make_unique<HybridModel>(spec, resources);
      model->init(cfg.train.seeds.front());
    }
    for (const auto& [name, split] : corpus.splits) {
      const auto examples = prepare_examples(split, corpus.tokens.at(name), resources, spec, cfg.preprocess);
      std::ostringstream tsv;
      tsv << "id\tlabel";
      for (int i = 0; i < model->dims().total(); ++i) tsv << "\tf" << i;
      tsv << '\n';
      for (const auto& ex : examples) {
        const Vector f = model->fused(ex, Mode::eval);
        tsv << ex.id << '\t' << (ex.label ? corpus.labels.name_of(*ex.label) : std::string());
        for (Eigen::Index i = 0; i < f.size(); ++i) tsv << '\t' << num(f(i));
        tsv << '\n';
      }
      write_file(out / (name + "_fused.tsv"), tsv.str());
    }
    wrote = true;
  }

  if (!wrote) throw Error(ErrorKind::config, "nothing to featurize: set paths.nrc_lexicon, paths.embeddings or --fused");
  std::cout << "features written to " << out.string() << '\n';
  return 0;
}

int cmd_train(const GlobalOptions& g) {
  AppConfig cfg = load_config(g);
  const std::vector<Variant> variants =
      g.variant == "all" ? all_variants() : std::vector<Variant>{cfg.train.variant};
  bool need_ewe = false;
  bool need_nrc = false;
  for (const auto v : variants) {
    need_ewe = need_ewe || uses_ewe(v);
    need_nrc = need_nrc || uses_nrc(v);
  }

  const Corpus corpus = load_corpus(cfg, {"train", "validation"}, true);
  Resources resources;
  if (need_nrc) resources.lexicon = load_lexicon(cfg);
  if (need_ewe) resources.embeddings = build_embeddings(cfg, corpus);
  resources.encoder = TransformerEncoder::load(cfg.encoder);

  const ModelSpec spec = cfg.model_spec();
  const auto train_set =
      prepare_examples(corpus.splits.at("train"), corpus.tokens.at("train"), resources, spec, cfg.preprocess);
  const auto val_set = prepare_examples(corpus.splits.at("validation"), corpus.tokens.at("validation"), resources,
                                        spec, cfg.preprocess);

  Variant current = variants.front();
  long long current_seed = cfg.train.seeds.front();
  std::size_t seed_index = 0;
  const auto on_epoch = [&](const EpochRecord& e) {
    std::cerr << '[' << to_string(current) << " seed " << current_seed << "] epoch " << e.epoch
              << " train_loss=" << e.train_loss << " val_loss=" << e.val_loss << " val_acc=" << e.val_accuracy
              << " val_macro_f1=" << e.val_macro_f1 << '\n';
  };

  std::vector<RunRecord> records;
  const auto on_run = [&](Variant v, const SeedRun& run, const HybridModel& model) {
    const fs::path dir = run_dir_for(cfg, v, run.seed);
    AppConfig snapshot = cfg;
    snapshot.train.variant = v;
    snapshot.train.seeds = {run.seed};
    fs::create_directories(dir);
    snapshot.save(dir / "config.yaml");
    model.save_parameters(dir);
    const auto& best = run.history.epochs.at(static_cast<std::size_t>(run.history.best_epoch - 1));
    nlohmann::ordered_json marker{{"best_epoch", run.history.best_epoch},
                                  {"val_loss", best.val_loss},
                                  {"epochs_run", run.history.epochs_run()},
                                  {"stopped_early", run.history.stopped_early}};
    write_file(dir / "best_epoch.json", marker.dump(2) + "\n");
    write_file(dir / "history.jsonl", run.history.to_jsonl());
    RunRecord rec{v, run.seed, run.history.best_epoch, run.train, run.validation};
    write_file(dir / "metrics.json", metrics_json(rec));
    records.push_back(rec);
    std::cerr << '[' << to_string(v) << " seed " << run.seed << "] done: best epoch " << run.history.best_epoch
              << ", validation accuracy " << run.validation.accuracy << ", macro F1 " << run.validation.macro_f1
              << '\n';
    ++seed_index;
    if (seed_index < cfg.train.seeds.size()) {
      current_seed = cfg.train.seeds[seed_index];
    } else {
      seed_index = 0;
      current_seed = cfg.train.seeds.front();
      const auto it = std::find(variants.begin(), variants.end(), v);
      if (it + 1 != variants.end()) current = *(it + 1);
    }
  };

  run_ablation(cfg.train, spec, resources, train_set, val_set, variants, on_run, on_epoch);

  const fs::path runs = fs::path(cfg.paths.output_dir) / "runs";
  for (const auto v : variants) {
    std::vector<RunRecord> mine;
    for (const auto& r : records) {
      if (r.variant == v) mine.push_back(r);
    }
    const auto rows = summarize(mine);
    write_file(runs / std::string(to_string(v)) / "summary.json", summary_json(rows, mine));
    write_file(runs / std::string(to_string(v)) / "table.txt", format_table(rows));
  }
  const auto rows = summarize(records);
  if (variants.size() > 1) {
    write_file(runs / "summary.json", summary_json(rows, records));
    write_file(runs / "table.txt", format_table(rows));
  }
  std::cout << format_table(rows);
  return 0;
}

int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o) {
  auto session = open_checkpoint(g, o.run_dir);
  const Corpus corpus = load_corpus(session.cfg, {o.split}, false);
  const ModelSpec& spec = session.spec;
  const auto examples = prepare_examples(corpus.splits.at(o.split), corpus.tokens.at(o.split), session.resources,
                                         spec, session.cfg.preprocess);
  if (!corpus.splits.at(o.split).labeled()) {
    throw Error(ErrorKind::data, "split '" + o.split + "' is unlabeled and cannot be evaluated");
  }
  const auto m = evaluate(*session.model, examples, corpus.labels.size(), o.split);
  nlohmann::ordered_json j{{"variant", std::string(to_string(spec.variant))},
                           {"split", m.split},
                           {"essays", examples.size()},
                           {"accuracy", m.accuracy},
                           {"macro_f1", m.macro_f1},
                           {"loss", m.loss}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_predict(const GlobalOptions& g, const PredictOptions& o) {
  auto session = open_checkpoint(g, o.run_dir);
  const AppConfig& cfg = session.cfg;
  const fs::path input = o.input.empty() ? require(cfg.paths.test, "paths.test (or --input)") : o.input;
  const fs::path out_path = o.out.empty() ? fs::path(cfg.paths.output_dir) / "predictions.txt" : fs::path(o.out);
  if (!has_data_rows(input)) {
    write_file(out_path, "");
    std::cout << "0 predictions written to " << out_path.string() << '\n';
    return 0;
  }
  const LabelSet labels = cfg.label_set();
  const auto split = load_dataset(input, labels, "test", cfg.columns);
  const StopwordSet stops = load_stopwords(cfg);
  std::vector<TokenSequence> toks;
  for (const auto& e : split.essays) toks.push_back(preprocess_essay(e.raw_text, stops, cfg.preprocess));
  const ModelSpec& spec = session.spec;
  const auto examples = prepare_examples(split, toks, session.resources, spec, cfg.preprocess);
  std::ostringstream lines;
  for (const auto& ex : examples) lines << labels.name_of(predict(session.model->predict_proba(ex))) << '\n';
  write_file(out_path, lines.str());
  std::cout << examples.size() << " predictions written to " << out_path.string() << '\n';
  return 0;
}

int cmd_report(const GlobalOptions& g, const ReportOptions& o) {
  AppConfig cfg;
  if (!g.config.empty()) cfg = AppConfig::load(g.config);
  if (!g.output.empty()) cfg.paths.output_dir = g.output;
  std::vector<fs::path> dirs;
  for (const auto& d : o.run_dirs) dirs.emplace_back(d);
  if (dirs.empty()) dirs.push_back(fs::path(cfg.paths.output_dir) / "runs");
  const auto records = collect_runs(dirs);
  const auto rows = summarize(records);
  const std::string table = format_table(rows);
  if (!g.output.empty()) {
    const fs::path out = fs::path(g.output) / "report";
    write_file(out / "table.txt", table);
    write_file(out / "summary.json", summary_json(rows, records));
  }
  std::cout << table;
  return 0;
}

}  // namespace emofuse::cli
