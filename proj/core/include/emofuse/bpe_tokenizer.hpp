#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emofuse {

/// Byte-level BPE as used by RoBERTa/GPT-2 checkpoints (vocab.json +
/// merges.txt). Pre-tokenisation follows the GPT-2 split pattern; every
/// non-ASCII code point is treated as a letter.
class BpeTokenizer {
 public:
  /// Throws Error(io) or Error(format).
  static BpeTokenizer load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);

  /// Subword ids without special tokens.
  std::vector<int> tokenize(std::string_view text) const;

  /// <s> + first (max_len - 2) subword ids + </s>.
  std::vector<int> encode(std::string_view text, std::size_t max_len) const;

  int bos_id() const { return bos_id_; }
  int eos_id() const { return eos_id_; }
  int unk_id() const { return unk_id_; }
  std::size_t vocab_size() const { return vocab_.size(); }

  /// GPT-2 pre-tokenisation split (exposed for tests).
  static std::vector<std::string> pretokenize(std::string_view text);

 private:
  std::vector<std::string> bpe(const std::string& word) const;

  std::unordered_map<std::string, int> vocab_;
  std::unordered_map<std::string, int> merge_ranks_;  // key: left + ' ' + right
  std::vector<std::string> byte_symbol_;               // byte -> UTF-8 of its mapped code point
  int bos_id_ = 0;
  int eos_id_ = 2;
  int unk_id_ = 3;
};

}  // namespace emofuse
