#include "emofuse/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json split_json(const RunMetrics& m) {
  return ordered_json{{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"loss", m.loss}};
}

RunMetrics split_from_json(const nlohmann::json& j, const std::string& name, long long seed, int epochs) {
  RunMetrics m;
  m.split = name;
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.loss = j.value("loss", 0.0);
  m.seed = seed;
  m.epochs_run = epochs;
  return m;
}

bool looks_like_run_dir(const fs::path& dir) {
  return std::any_of(run_dir_files().begin(), run_dir_files().end(),
                     [&](const std::string& f) { return fs::exists(dir / f); });
}

void gather(const fs::path& dir, std::vector<fs::path>& out) {
  if (looks_like_run_dir(dir)) {
    out.push_back(dir);
    return;
  }
  std::vector<fs::path> children;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) children.push_back(entry.path());
  }
  std::sort(children.begin(), children.end());
  for (const auto& c : children) gather(c, out);
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& run_dir_files() {
  static const std::vector<std::string> files{"config.yaml", "params.safetensors", "best_epoch.json", "history.jsonl",
                                              "metrics.json"};
  return files;
}

std::string metrics_json(const RunRecord& r) {
  ordered_json j{{"variant", std::string(to_string(r.variant))},
                 {"seed", r.seed},
                 {"epochs_run", r.validation.epochs_run},
                 {"best_epoch", r.best_epoch},
                 {"train", split_json(r.train)},
                 {"validation", split_json(r.validation)}};
  return j.dump(2) + "\n";
}

RunRecord parse_metrics_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunRecord r;
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.seed = j.at("seed").get<long long>();
    r.best_epoch = j.value("best_epoch", 0);
    const int epochs = j.at("epochs_run").get<int>();
    r.train = split_from_json(j.at("train"), "train", r.seed, epochs);
    r.validation = split_from_json(j.at("validation"), "validation", r.seed, epochs);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("malformed metrics JSON: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::format, std::string("malformed metrics JSON: ") + e.what());
  }
}

RunRecord read_run_dir(const fs::path& dir) {
  for (const auto& f : run_dir_files()) {
    if (!fs::exists(dir / f)) throw Error(ErrorKind::data, "incomplete run directory " + dir.string() + ": missing " + f);
  }
  std::ifstream in(dir / "metrics.json");
  if (!in) throw Error(ErrorKind::io, "cannot open " + (dir / "metrics.json").string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_metrics_json(buf.str());
}

std::vector<RunRecord> collect_runs(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw Error(ErrorKind::usage, "no run directories given");
  std::vector<RunRecord> records;
  for (const auto& p : paths) {
    if (!fs::is_directory(p)) throw Error(ErrorKind::io, "run directory " + p.string() + " does not exist");
    std::vector<fs::path> dirs;
    gather(p, dirs);
    if (dirs.empty()) throw Error(ErrorKind::data, "no completed runs under " + p.string());
    for (const auto& d : dirs) records.push_back(read_run_dir(d));
  }
  return records;
}

std::vector<TableRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<TableRow> rows;
  for (const auto v : all_variants()) {
    std::vector<RunMetrics> train;
    std::vector<RunMetrics> val;
    for (const auto& r : records) {
      if (r.variant != v) continue;
      train.push_back(r.train);
      val.push_back(r.validation);
    }
    if (train.empty()) continue;
    rows.push_back({v, train.size(), average(train, "train"), average(val, "validation")});
  }
  return rows;
}

std::string display_name(Variant v) {
  switch (v) {
    case Variant::vanilla: return "RoBERTa";
    case Variant::roberta_ewe: return "RoBERTa + EWE";
    case Variant::roberta_nrc_ewe: return "RoBERTa + NRC + EWE";
  }
  return "?";
}

std::string format_table(const std::vector<TableRow>& rows) {
  const std::vector<std::string> header{"Model", "Training Accuracy", "Training Macro-F1", "Validation Accuracy",
                                        "Validation Macro-F1"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    cells.push_back({display_name(r.variant), fixed(r.train.accuracy), fixed(r.train.macro_f1),
                     fixed(r.validation.accuracy), fixed(r.validation.macro_f1)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i == 0 ? "| " : " | ");
      if (i == 0) {
        out << row[i] << std::string(width[i] - row[i].size(), ' ');
      } else {
        out << std::string(width[i] - row[i].size(), ' ') << row[i];
      }
    }
    out << " |\n";
  };
  line(cells[0]);
  out << '|';
  for (const auto w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) line(cells[i]);
  return out.str();
}

std::string summary_json(const std::vector<TableRow>& rows, const std::vector<RunRecord>& records) {
  ordered_json j;
  j["runs"] = ordered_json::array();
  for (const auto& r : records) {
    j["runs"].push_back(ordered_json{{"variant", std::string(to_string(r.variant))},
                                     {"seed", r.seed},
                                     {"epochs_run", r.validation.epochs_run},
                                     {"best_epoch", r.best_epoch},
                                     {"train", split_json(r.train)},
                                     {"validation", split_json(r.validation)}});
  }
  j["averaged"] = ordered_json::array();
  for (const auto& row : rows) {
    j["averaged"].push_back(ordered_json{{"variant", std::string(to_string(row.variant))},
                                         {"runs", row.runs},
                                         {"train", split_json(row.train)},
                                         {"validation", split_json(row.validation)}});
  }
  return j.dump(2) + "\n";
}

}  // namespace emofuse
