#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "emofuse/encoder.hpp"
#include "emofuse/ewe.hpp"
#include "emofuse/nrc.hpp"
#include "emofuse/preprocess.hpp"

using namespace emofuse;

namespace {

const std::filesystem::path kData = EMOFUSE_TEST_DATA_DIR;

std::string sample_essay(std::size_t words) {
  static const char* pool[] = {"The", "storm", "flooded", "our", "street,", "and", "I", "can't", "believe", "it!!",
                               "People", "lost", "homes", "2", "days", "ago;", "so", "sad."};
  std::mt19937 gen(1);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += pool[gen() % std::size(pool)];
  }
  return out;
}

void BM_CleanText(benchmark::State& state) {
  const auto text = sample_essay(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(clean_text(text));
}
BENCHMARK(BM_CleanText)->Arg(50)->Arg(200);

void BM_ScoreEssay(benchmark::State& state) {
  const auto lex = NrcLexicon::load(kData / "fixture" / "nrc_lexicon.txt");
  const auto tokens = tokenize_truncate(clean_text(sample_essay(100)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(score_essay(tokens, lex));
}
BENCHMARK(BM_ScoreEssay);

void BM_CnnForward(benchmark::State& state) {
  CnnBranch cnn;
  Rng rng(1, 1);
  cnn.init(rng);
  const Matrix m = Matrix::Random(100, 300);
  for (auto _ : state) benchmark::DoNotOptimize(cnn.forward(m));
}
BENCHMARK(BM_CnnForward);

void BM_TinyEncoderForward(benchmark::State& state) {
  const auto enc = TransformerEncoder::load(kData / "tiny_roberta", 32);
  const auto text = clean_text(sample_essay(40));
  for (auto _ : state) benchmark::DoNotOptimize(enc->encode(text));
}
BENCHMARK(BM_TinyEncoderForward);

}  // namespace

BENCHMARK_MAIN();
