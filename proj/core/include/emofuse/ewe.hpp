#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "emofuse/nn.hpp"
#include "emofuse/preprocess.hpp"

namespace emofuse {

inline constexpr int kEmbeddingDim = 300;

/// Vocabulary-indexed table of pretrained vectors. Row 0 is the all-zero
/// padding row; out-of-vocabulary words resolve to it.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(int dim = kEmbeddingDim);

  /// Vocabulary = union of tokens over `corpora` in first-seen order. Rows
  /// come from a whitespace-separated text file (word then `dim` reals); an
  /// optional "<count> <dim>" first line is skipped, words missing from the
  /// file keep a zero row, and duplicate file entries resolve to the last.
  /// Throws Error(io) or Error(format).
  static EmbeddingMatrix build(const std::vector<const std::vector<TokenSequence>*>& corpora,
                               const std::filesystem::path& embedding_file, int dim = kEmbeddingDim);

  /// Adopts an explicit vocabulary (row order = vocab order + 1) and table.
  static EmbeddingMatrix from_table(std::vector<std::string> vocab, Matrix table);

  int dim() const { return dim_; }
  std::size_t rows() const { return static_cast<std::size_t>(table.value.rows()); }
  const std::vector<std::string>& vocab() const { return words_; }

  /// Row index for a word; 0 when unknown.
  int row_of(const std::string& word) const;
  std::vector<int> rows_of(const TokenSequence& tokens) const;

  /// Writes the table in the same text format build() reads.
  void save_text(const std::filesystem::path& path) const;

  Param<double> table;

 private:
  int dim_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Fixed-shape (seq_len, dim) essay representation; rows past the token
/// count are zero.
using EssayMatrix = Matrix;

/// Throws Error(dimension) when the sequence is longer than seq_len.
EssayMatrix essay_to_matrix(const TokenSequence& tokens, const EmbeddingMatrix& embeddings,
                            int seq_len = static_cast<int>(kDefaultMaxTokens));
EssayMatrix rows_to_matrix(const std::vector<int>& rows, const EmbeddingMatrix& embeddings, int seq_len);

/// 1-D convolution over the row (token) axis with `in` channels per row.
/// Weight layout is (out, kernel * in) with the kernel offset as the outer
/// index, so a window of consecutive rows is a contiguous slice of the input.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, int in_channels, int out_channels, int kernel);

  int kernel() const { return kernel_; }
  int in_channels() const { return in_; }
  int out_channels() const { return static_cast<int>(weight.value.rows()); }

  void init_default(Rng& rng);
  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  Param<double> weight;
  Param<double> bias;

 private:
  int in_ = 0;
  int kernel_ = 0;
};

/// Non-overlapping max pooling over rows; a trailing partial window is dropped.
struct MaxPool1d {
  struct Cache {
    std::vector<Eigen::Index> argmax;
    Eigen::Index input_rows = 0;
  };
  static Matrix forward(const Matrix& x, int width, Cache* cache);
  static Matrix backward(const Cache& cache, const Matrix& dy);
};

struct CnnConfig {
  int embed_dim = kEmbeddingDim;
  int seq_len = static_cast<int>(kDefaultMaxTokens);
  int conv1_channels = 64;
  int conv1_kernel = 5;
  int pool1 = 2;
  int conv2_channels = 16;
  int conv2_kernel = 5;
  int pool2 = 2;

  /// Throws Error(config) if any stage would produce an empty sequence.
  void validate() const;
  int output_dim() const { return conv2_channels; }
  bool operator==(const CnnConfig&) const = default;
};

/// conv -> tanh -> maxpool -> conv -> tanh -> maxpool -> global max over
/// the remaining token axis.
class CnnBranch {
 public:
  struct Trace {
    Matrix input;
    Matrix act1;
    MaxPool1d::Cache pool1;
    Matrix pooled1;
    Matrix act2;
    MaxPool1d::Cache pool2;
    Matrix pooled2;
    std::vector<Eigen::Index> global_argmax;
  };

  CnnBranch() : CnnBranch(CnnConfig{}) {}
  explicit CnnBranch(const CnnConfig& config);

  const CnnConfig& config() const { return config_; }
  int output_dim() const { return config_.output_dim(); }

  void init(Rng& rng);
  Vector forward(const EssayMatrix& m, Trace* trace = nullptr) const;
  /// Accumulates parameter gradients; returns dL/d(essay matrix).
  Matrix backward(const Trace& trace, const Vector& d_out);

  std::vector<Param<double>*> params();

  Conv1d conv1;
  Conv1d conv2;

 private:
  CnnConfig config_;
};

}  // namespace emofuse
