#include "emofuse/preprocess.hpp"

#include <fstream>

#include "emofuse/error.hpp"

namespace emofuse {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string> split_spaces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const auto start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::string TokenSequence::text() const {
  std::string out;
  for (const auto& token : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open stopword file " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && is_space(line.back())) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && is_space(line[start])) ++start;
    if (start == line.size() || line[start] == '#') continue;
    words.insert(line.substr(start));
  }
  if (words.empty()) throw Error(ErrorKind::data, "stopword file " + path.string() + " contains no words");
  return StopwordSet(std::move(words));
}

std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (const char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
    } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c | 0x20));
    }
  }
  return out;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopwordSet& stops) {
  std::vector<std::string> kept;
  kept.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (!stops.contains(token)) kept.push_back(token);
  }
  return kept;
}

TokenSequence tokenize_truncate(std::string_view text, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorKind::config, "max_len must be positive");
  TokenSequence seq;
  seq.tokens = split_spaces(text);
  seq.original_length = seq.tokens.size();
  if (seq.tokens.size() > max_len) seq.tokens.resize(max_len);
  return seq;
}

TokenSequence preprocess_essay(std::string_view raw, const StopwordSet& stops, const PreprocessOptions& options) {
  if (options.max_len == 0) throw Error(ErrorKind::config, "max_len must be positive");
  auto tokens = split_spaces(clean_text(raw));
  if (options.remove_stopwords) tokens = remove_stopwords(tokens, stops);
  TokenSequence seq;
  seq.original_length = tokens.size();
  if (tokens.size() > options.max_len) tokens.resize(options.max_len);
  seq.tokens = std::move(tokens);
  return seq;
}

}  // namespace emofuse
