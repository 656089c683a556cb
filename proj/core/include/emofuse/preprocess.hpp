#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace emofuse {

inline constexpr std::size_t kDefaultMaxTokens = 100;

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t original_length = 0;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  /// Tokens joined by single spaces.
  std::string text() const;

  bool operator==(const TokenSequence&) const = default;
};

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// One lowercase word per line; blank lines and '#' comments skipped.
  /// Throws Error(io) naming the path when unreadable, Error(data) when empty.
  static StopwordSet load(const std::filesystem::path& path);

  bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Lowercased ASCII letters separated by single spaces. Any whitespace
/// becomes a separator; every other byte (digits, punctuation, symbols,
/// non-ASCII) is deleted.
std::string clean_text(std::string_view raw);

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopwordSet& stops);

/// Splits cleaned text on spaces and keeps the first max_len tokens.
TokenSequence tokenize_truncate(std::string_view text, std::size_t max_len = kDefaultMaxTokens);

struct PreprocessOptions {
  bool remove_stopwords = true;
  std::size_t max_len = kDefaultMaxTokens;
  bool operator==(const PreprocessOptions&) const = default;
};

/// clean -> split -> stopword removal -> truncation. original_length counts
/// tokens after stopword removal and before truncation.
TokenSequence preprocess_essay(std::string_view raw, const StopwordSet& stops, const PreprocessOptions& options);

}  // namespace emofuse
