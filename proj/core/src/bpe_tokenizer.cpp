#include "emofuse/bpe_tokenizer.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

namespace {

std::string utf8_of(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

/// GPT-2's reversible byte -> printable code point table.
std::vector<std::string> byte_symbols() {
  std::vector<int> mapped(256, -1);
  for (int b = '!'; b <= '~'; ++b) mapped[b] = b;
  for (int b = 0xA1; b <= 0xAC; ++b) mapped[b] = b;
  for (int b = 0xAE; b <= 0xFF; ++b) mapped[b] = b;
  int next = 0;
  for (int b = 0; b < 256; ++b) {
    if (mapped[b] < 0) mapped[b] = 256 + next++;
  }
  std::vector<std::string> out(256);
  for (int b = 0; b < 256; ++b) out[b] = utf8_of(static_cast<std::uint32_t>(mapped[b]));
  return out;
}

enum class CharClass { letter, number, space, other };

struct CodePoint {
  std::size_t offset;
  std::size_t length;
  std::uint32_t value;
  CharClass cls;
};

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, text.size() - i);
    std::uint32_t value = lead;
    CharClass cls = CharClass::letter;
    if (lead < 0x80) {
      const char c = static_cast<char>(lead);
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
        cls = CharClass::letter;
      } else if (c >= '0' && c <= '9') {
        cls = CharClass::number;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        cls = CharClass::space;
      } else {
        cls = CharClass::other;
      }
    }
    out.push_back({i, len, value, cls});
    i += len;
  }
  return out;
}

}  // namespace

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) {
  BpeTokenizer tok;
  tok.byte_symbol_ = byte_symbols();

  std::ifstream vin(vocab_json);
  if (!vin) throw Error(ErrorKind::io, "cannot open tokenizer vocabulary " + vocab_json.string());
  try {
    const auto vocab = nlohmann::json::parse(vin);
    for (const auto& [token, id] : vocab.items()) tok.vocab_[token] = id.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, vocab_json.string() + ": " + e.what());
  }

  std::ifstream min(merges_txt);
  if (!min) throw Error(ErrorKind::io, "cannot open tokenizer merges " + merges_txt.string());
  std::string line;
  int rank = 0;
  while (std::getline(min, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with("#version")) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || line.find(' ', space + 1) != std::string::npos) {
      throw Error(ErrorKind::format, merges_txt.string() + ": malformed merge '" + line + "'");
    }
    tok.merge_ranks_.emplace(line, rank++);
  }

  const auto special = [&](const char* name, int fallback) {
    const auto it = tok.vocab_.find(name);
    return it == tok.vocab_.end() ? fallback : it->second;
  };
  tok.bos_id_ = special("<s>", 0);
  tok.eos_id_ = special("</s>", 2);
  tok.unk_id_ = special("<unk>", 3);
  return tok;
}

std::vector<std::string> BpeTokenizer::pretokenize(std::string_view text) {
  const auto cps = decode(text);
  const std::size_t n = cps.size();
  std::vector<std::string> pieces;
  const auto emit = [&](std::size_t from, std::size_t to) {
    const auto begin = cps[from].offset;
    const auto end = to < n ? cps[to].offset : text.size();
    pieces.emplace_back(text.substr(begin, end - begin));
  };
  const auto is_char = [&](std::size_t k, char c) { return k < n && cps[k].value == static_cast<unsigned char>(c); };

  std::size_t i = 0;
  while (i < n) {
    if (is_char(i, '\'')) {
      std::size_t len = 0;
      if (is_char(i + 1, 'r') && is_char(i + 2, 'e')) {
        len = 3;
      } else if (is_char(i + 1, 'v') && is_char(i + 2, 'e')) {
        len = 3;
      } else if (is_char(i + 1, 'l') && is_char(i + 2, 'l')) {
        len = 3;
      } else if (is_char(i + 1, 's') || is_char(i + 1, 't') || is_char(i + 1, 'm') || is_char(i + 1, 'd')) {
        len = 2;
      }
      if (len > 0) {
        emit(i, i + len);
        i += len;
        continue;
      }
    }
    std::size_t j = i;
    if (is_char(i, ' ') && i + 1 < n && cps[i + 1].cls != CharClass::space) j = i + 1;
    if (cps[j].cls != CharClass::space) {
      const CharClass cls = cps[j].cls;
      std::size_t k = j;
      while (k < n && cps[k].cls == cls) ++k;
      emit(i, k);
      i = k;
      continue;
    }
    std::size_t k = i;
    while (k < n && cps[k].cls == CharClass::space) ++k;
    if (k < n && k - i >= 2) k -= 1;
    emit(i, k);
    i = k;
  }
  return pieces;
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& word) const {
  std::vector<std::string> symbols;
  symbols.reserve(word.size());
  for (const char c : word) symbols.push_back(byte_symbol_[static_cast<unsigned char>(c)]);

  while (symbols.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    std::size_t best = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = merge_ranks_.find(symbols[i] + ' ' + symbols[i + 1]);
      if (it != merge_ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    const std::string left = symbols[best];
    const std::string right = symbols[best + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(symbols[i]);
        ++i;
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<int> BpeTokenizer::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& piece : pretokenize(text)) {
    for (const auto& symbol : bpe(piece)) {
      const auto it = vocab_.find(symbol);
      ids.push_back(it == vocab_.end() ? unk_id_ : it->second);
    }
  }
  return ids;
}

std::vector<int> BpeTokenizer::encode(std::string_view text, std::size_t max_len) const {
  if (max_len < 2) throw Error(ErrorKind::config, "max subword length must be at least 2");
  auto body = tokenize(text);
  if (body.size() > max_len - 2) body.resize(max_len - 2);
  std::vector<int> ids;
  ids.reserve(body.size() + 2);
  ids.push_back(bos_id_);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(eos_id_);
  return ids;
}

}  // namespace emofuse
