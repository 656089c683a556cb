#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emofuse/metrics.hpp"
#include "emofuse/training.hpp"

namespace emofuse {

/// Files every completed run directory holds.
const std::vector<std::string>& run_dir_files();

/// Outcome of one (variant, seed) training run.
struct RunRecord {
  Variant variant = Variant::vanilla;
  long long seed = 0;
  int best_epoch = 0;
  RunMetrics train;
  RunMetrics validation;
};

std::string metrics_json(const RunRecord& record);
/// Throws Error(format) for malformed input.
RunRecord parse_metrics_json(const std::string& text);

/// Throws Error(data) naming the missing file when the directory is incomplete.
RunRecord read_run_dir(const std::filesystem::path& dir);

/// Each path may be a run directory or any ancestor of run directories.
/// Throws Error(data) when a path holds no runs or an incomplete one.
std::vector<RunRecord> collect_runs(const std::vector<std::filesystem::path>& paths);

struct TableRow {
  Variant variant = Variant::vanilla;
  std::size_t runs = 0;
  RunMetrics train;
  RunMetrics validation;
};

/// One row per variant present, in vanilla / +EWE / +NRC+EWE order, with
/// seed-averaged metrics.
std::vector<TableRow> summarize(const std::vector<RunRecord>& records);

/// Display name used in the comparison table.
std::string display_name(Variant v);

/// Model | Training Accuracy | Training Macro-F1 | Validation Accuracy |
/// Validation Macro-F1.
std::string format_table(const std::vector<TableRow>& rows);

/// Per-seed entries plus averaged rows.
std::string summary_json(const std::vector<TableRow>& rows, const std::vector<RunRecord>& records);

}  // namespace emofuse
