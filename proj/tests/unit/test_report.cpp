#include <gtest/gtest.h>

#include <fstream>

#include "emofuse/error.hpp"
#include "emofuse/report.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace emofuse;
using emofuse::testing::error_kind;
using emofuse::testing::TempDir;

namespace {

RunRecord record(Variant v, long long seed, double tr_acc, double tr_f1, double va_acc, double va_f1) {
  RunRecord r;
  r.variant = v;
  r.seed = seed;
  r.best_epoch = 4;
  r.train = {"train", tr_acc, tr_f1, seed, 14, 0.5};
  r.validation = {"validation", va_acc, va_f1, seed, 14, 0.9};
  return r;
}

void write_run(const std::filesystem::path& dir, const RunRecord& r, bool complete = true) {
  std::filesystem::create_directories(dir);
  for (const auto& f : run_dir_files()) {
    if (f == "metrics.json") continue;
    std::ofstream(dir / f) << "x";
  }
  if (complete) std::ofstream(dir / "metrics.json") << metrics_json(r);
}

}  // namespace

TEST(Report, MetricsJsonRoundTrip) {
  const auto r = record(Variant::roberta_ewe, 42, 0.75, 0.7, 0.5, 0.45);
  const auto back = parse_metrics_json(metrics_json(r));
  EXPECT_EQ(back.variant, r.variant);
  EXPECT_EQ(back.seed, 42);
  EXPECT_EQ(back.best_epoch, 4);
  EXPECT_DOUBLE_EQ(back.train.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(back.validation.macro_f1, 0.45);
  EXPECT_EQ(back.validation.epochs_run, 14);
  EXPECT_EQ(error_kind([] { parse_metrics_json("{\"variant\": 3}"); }), ErrorKind::format);
  EXPECT_EQ(error_kind([] { parse_metrics_json("nope"); }), ErrorKind::format);
}

TEST(Report, SummarizeAveragesSeedsPerVariant) {
  TempDir dir;
  write_run(dir / "runs" / "roberta_nrc_ewe" / "seed-13", record(Variant::roberta_nrc_ewe, 13, 0.9, 0.8, 0.5, 0.4));
  write_run(dir / "runs" / "roberta_nrc_ewe" / "seed-42", record(Variant::roberta_nrc_ewe, 42, 0.7, 0.6, 0.3, 0.2));
  write_run(dir / "runs" / "vanilla" / "seed-13", record(Variant::vanilla, 13, 0.6, 0.5, 0.25, 0.125));
  const auto runs = collect_runs({dir / "runs"});
  ASSERT_EQ(runs.size(), 3u);
  const auto rows = summarize(runs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].variant, Variant::vanilla);
  EXPECT_EQ(rows[1].variant, Variant::roberta_nrc_ewe);
  EXPECT_EQ(rows[1].runs, 2u);
  EXPECT_NEAR(rows[1].train.accuracy, 0.8, 1e-12);
  EXPECT_NEAR(rows[1].train.macro_f1, 0.7, 1e-12);
  EXPECT_NEAR(rows[1].validation.accuracy, 0.4, 1e-12);
  EXPECT_NEAR(rows[1].validation.macro_f1, 0.3, 1e-12);

  const auto table = format_table(rows);
  EXPECT_NE(table.find("| Model"), std::string::npos);
  EXPECT_NE(table.find("Validation Macro-F1"), std::string::npos);
  EXPECT_NE(table.find("RoBERTa + NRC + EWE"), std::string::npos);
  EXPECT_NE(table.find("0.800"), std::string::npos);
  EXPECT_NE(table.find("0.125"), std::string::npos);

  const auto j = nlohmann::json::parse(summary_json(rows, runs));
  EXPECT_EQ(j["runs"].size(), 3u);
  EXPECT_EQ(j["averaged"].size(), 2u);
}

TEST(Report, SingleRunGivesSingleRow) {
  const auto rows = summarize({record(Variant::roberta_ewe, 1, 1.0, 1.0, 0.5, 0.5)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 1u);
  const auto table = format_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);  // header, rule, one row
}

TEST(Report, IncompleteOrEmptyDirectoriesAreDataErrors) {
  TempDir dir;
  write_run(dir / "a", record(Variant::vanilla, 1, 0, 0, 0, 0), false);
  try {
    collect_runs({dir / "a"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("metrics.json"), std::string::npos);
  }
  std::filesystem::create_directories(dir / "empty");
  EXPECT_EQ(error_kind([&] { collect_runs({dir / "empty"}); }), ErrorKind::data);
  EXPECT_EQ(error_kind([&] { collect_runs({dir / "missing"}); }), ErrorKind::io);
}

TEST(Report, DisplayNames) {
  EXPECT_EQ(display_name(Variant::vanilla), "RoBERTa");
  EXPECT_EQ(display_name(Variant::roberta_ewe), "RoBERTa + EWE");
  EXPECT_EQ(display_name(Variant::roberta_nrc_ewe), "RoBERTa + NRC + EWE");
}
