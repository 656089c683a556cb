#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "emofuse/error.hpp"
#include "emofuse/preprocess.hpp"
#include "test_support.hpp"

using namespace emofuse;

TEST(CleanText, Examples) {
  EXPECT_EQ(clean_text("He scored 3   goals!!"), "he scored goals");
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("abc"), "abc");
  EXPECT_EQ(clean_text("ABC"), "abc");
  EXPECT_EQ(clean_text("  \t leading and trailing \n "), "leading and trailing");
  EXPECT_EQ(clean_text("don't"), "dont");
  EXPECT_EQ(clean_text("caf\xC3\xA9 na\xC3\xAFve"), "caf nave");
  EXPECT_EQ(clean_text("1234 !!!"), "");
}

TEST(CleanText, PropertiesOnRandomInput) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw(static_cast<std::size_t>(byte(gen) % 80), ' ');
    for (auto& c : raw) c = static_cast<char>(byte(gen));
    const auto out = clean_text(raw);
    EXPECT_EQ(clean_text(out), out);
    EXPECT_EQ(out.find("  "), std::string::npos);
    if (!out.empty()) {
      EXPECT_NE(out.front(), ' ');
      EXPECT_NE(out.back(), ' ');
    }
    for (const char c : out) EXPECT_TRUE(c == ' ' || (c >= 'a' && c <= 'z'));
  }
}

TEST(RemoveStopwords, Examples) {
  const StopwordSet stops({"he"});
  EXPECT_EQ(remove_stopwords({"he", "scored", "goals"}, stops), (std::vector<std::string>{"scored", "goals"}));
  EXPECT_TRUE(remove_stopwords({}, stops).empty());
  const std::vector<std::string> clean{"scored", "goals"};
  EXPECT_EQ(remove_stopwords(clean, stops), clean);
}

TEST(RemoveStopwords, IdempotentAndNeverLonger) {
  const StopwordSet stops({"a", "the", "of"});
  std::mt19937_64 gen(5);
  const std::vector<std::string> pool{"a", "the", "of", "storm", "sad", "news"};
  for (int i = 0; i < 200; ++i) {
    const auto toks = emofuse::testing::random_tokens(gen, pool, 30);
    const auto once = remove_stopwords(toks, stops);
    EXPECT_LE(once.size(), toks.size());
    EXPECT_EQ(remove_stopwords(once, stops), once);
  }
}

TEST(TokenizeTruncate, Examples) {
  std::string essay;
  for (int i = 0; i < 150; ++i) essay += (i ? " w" : "w") + std::to_string(i % 10 == 0 ? 0 : 1);
  const auto long_seq = tokenize_truncate(clean_text(essay), 100);
  // digits are removed by cleaning; every word becomes "w"
  EXPECT_EQ(long_seq.size(), 100u);
  EXPECT_EQ(long_seq.original_length, 150u);

  const auto five = tokenize_truncate("one two three four five");
  EXPECT_EQ(five.size(), 5u);
  EXPECT_EQ(five.original_length, 5u);

  const auto empty = tokenize_truncate("");
  EXPECT_TRUE(empty.empty());
  EXPECT_EQ(empty.original_length, 0u);
}

TEST(TokenizeTruncate, LengthIsMinOfWordsAndLimit) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 300; ++i) {
    const std::size_t words = gen() % 160;
    const std::size_t limit = 1 + gen() % 120;
    const auto seq = tokenize_truncate(clean_text(emofuse::testing::random_essay_text(gen, words)), limit);
    EXPECT_EQ(seq.size(), std::min(words, limit));
    EXPECT_EQ(seq.original_length, words);
    for (const auto& t : seq.tokens) EXPECT_FALSE(t.empty());
  }
}

TEST(StopwordSet, LoadSkipsCommentsAndNamesMissingPath) {
  emofuse::testing::TempDir dir;
  std::ofstream(dir / "s.txt") << "# header\n\nthe\n  a  \n";
  const auto s = StopwordSet::load(dir / "s.txt");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.contains("a"));
  try {
    StopwordSet::load(dir / "missing.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("missing.txt"), std::string::npos);
  }
  std::ofstream(dir / "empty.txt") << "# nothing\n";
  EXPECT_THROW(StopwordSet::load(dir / "empty.txt"), Error);
}

TEST(StopwordSet, ShippedListIsUsable) {
  const auto s = StopwordSet::load(emofuse::testing::resource_dir() / "stopwords_en.txt");
  EXPECT_GT(s.size(), 150u);
  EXPECT_TRUE(s.contains("the"));
  EXPECT_TRUE(s.contains("dont"));
}

TEST(PreprocessEssay, FullPipeline) {
  const StopwordSet stops({"he", "the"});
  const auto seq = preprocess_essay("He saw THE storm, 3 times!", stops, {true, 2});
  EXPECT_EQ(seq.tokens, (std::vector<std::string>{"saw", "storm"}));
  EXPECT_EQ(seq.original_length, 3u);
  const auto kept = preprocess_essay("He saw", stops, {false, 100});
  EXPECT_EQ(kept.tokens, (std::vector<std::string>{"he", "saw"}));
}
