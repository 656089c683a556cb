#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emofuse/corpus.hpp"
#include "emofuse/preprocess.hpp"

namespace emofuse {

inline constexpr std::size_t kNrcEmotions = 6;

/// Per-essay sums of lexicon intensities, one slot per retained emotion in
/// NrcLexicon::emotion_order().
struct EmotionVector {
  std::array<double, kNrcEmotions> scores{};

  double& operator[](std::size_t i) { return scores[i]; }
  double operator[](std::size_t i) const { return scores[i]; }
  bool operator==(const EmotionVector&) const = default;
};

/// Word-level emotion intensities restricted to the six task emotions.
class NrcLexicon {
 public:
  using Intensities = std::array<std::optional<double>, kNrcEmotions>;

  /// anger, joy, sadness, disgust, fear, surprise.
  static const std::array<std::string, kNrcEmotions>& emotion_order();
  static std::optional<std::size_t> emotion_slot(std::string_view emotion);

  /// Reads word<TAB>emotion<TAB>score rows. A first line whose score field
  /// is not numeric is treated as a header. anticipation and trust rows are
  /// dropped. Throws Error(io|format|data).
  static NrcLexicon load(const std::filesystem::path& path);

  /// Throws Error(format) for an unknown emotion or a score outside [0, 1].
  void add(const std::string& word, std::string_view emotion, double score);

  const Intensities* find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::unordered_map<std::string, Intensities> entries_;
};

/// Sum of intensities over token occurrences; no normalisation.
EmotionVector score_essay(const TokenSequence& tokens, const NrcLexicon& lexicon);
EmotionVector score_essay(const std::vector<std::string>& tokens, const NrcLexicon& lexicon);

std::vector<EmotionVector> batch_score(const std::vector<TokenSequence>& essays, const NrcLexicon& lexicon);

}  // namespace emofuse
