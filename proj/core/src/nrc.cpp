#include "emofuse/nrc.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "emofuse/error.hpp"

namespace emofuse {

namespace {

std::optional<double> parse_real(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

bool is_discarded_emotion(std::string_view emotion) { return emotion == "anticipation" || emotion == "trust"; }

}  // namespace

const std::array<std::string, kNrcEmotions>& NrcLexicon::emotion_order() {
  static const std::array<std::string, kNrcEmotions> order{"anger", "joy", "sadness", "disgust", "fear", "surprise"};
  return order;
}

std::optional<std::size_t> NrcLexicon::emotion_slot(std::string_view emotion) {
  const auto& order = emotion_order();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == emotion) return i;
  }
  return std::nullopt;
}

void NrcLexicon::add(const std::string& word, std::string_view emotion, double score) {
  const auto slot = emotion_slot(emotion);
  if (!slot) throw Error(ErrorKind::format, "unknown emotion '" + std::string(emotion) + "'");
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(ErrorKind::format, "intensity for '" + word + "' outside [0,1]");
  }
  entries_[word][*slot] = score;
}

const NrcLexicon::Intensities* NrcLexicon::find(std::string_view word) const {
  const auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

NrcLexicon NrcLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open NRC lexicon " + path.string());

  NrcLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first_tab = line.find('\t');
    const auto second_tab = first_tab == std::string::npos ? std::string::npos : line.find('\t', first_tab + 1);
    if (second_tab == std::string::npos || line.find('\t', second_tab + 1) != std::string::npos) {
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated columns");
    }
    const std::string word = line.substr(0, first_tab);
    const std::string_view emotion = std::string_view(line).substr(first_tab + 1, second_tab - first_tab - 1);
    const auto score = parse_real(std::string_view(line).substr(second_tab + 1));
    if (!score) {
      if (line_no == 1) continue;  // header
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": non-numeric score");
    }
    if (is_discarded_emotion(emotion)) continue;
    try {
      lexicon.add(word, emotion, *score);
    } catch (const Error& e) {
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (lexicon.empty()) throw Error(ErrorKind::data, "empty lexicon after filtering: " + path.string());
  return lexicon;
}

EmotionVector score_essay(const std::vector<std::string>& tokens, const NrcLexicon& lexicon) {
  EmotionVector out;
  for (const auto& token : tokens) {
    const auto* intensities = lexicon.find(token);
    if (intensities == nullptr) continue;
    for (std::size_t e = 0; e < kNrcEmotions; ++e) {
      if ((*intensities)[e]) out[e] += *(*intensities)[e];
    }
  }
  return out;
}

EmotionVector score_essay(const TokenSequence& tokens, const NrcLexicon& lexicon) {
  return score_essay(tokens.tokens, lexicon);
}

std::vector<EmotionVector> batch_score(const std::vector<TokenSequence>& essays, const NrcLexicon& lexicon) {
  std::vector<EmotionVector> out;
  out.reserve(essays.size());
  for (const auto& essay : essays) out.push_back(score_essay(essay, lexicon));
  return out;
}

}  // namespace emofuse
