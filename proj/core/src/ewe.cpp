#include "emofuse/ewe.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "emofuse/error.hpp"

namespace emofuse {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && end == s.data() + s.size();
}

bool is_integer(std::string_view s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(int dim) : table("ewe.table", 1, dim), dim_(dim) {
  table.trainable = false;
}

EmbeddingMatrix EmbeddingMatrix::build(const std::vector<const std::vector<TokenSequence>*>& corpora,
                                       const std::filesystem::path& embedding_file, int dim) {
  EmbeddingMatrix emb(dim);
  for (const auto* corpus : corpora) {
    for (const auto& seq : *corpus) {
      for (const auto& token : seq.tokens) {
        if (emb.index_.emplace(token, static_cast<int>(emb.words_.size()) + 1).second) {
          emb.words_.push_back(token);
        }
      }
    }
  }
  emb.table.value = Matrix::Zero(static_cast<Eigen::Index>(emb.words_.size()) + 1, dim);

  std::ifstream in(embedding_file);
  if (!in) throw Error(ErrorKind::io, "cannot open embedding file " + embedding_file.string());
  std::vector<bool> filled(emb.words_.size() + 1, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) continue;
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw Error(ErrorKind::format, embedding_file.string() + ":" + std::to_string(line_no) + ": expected word and " +
                                         std::to_string(dim) + " values, found " + std::to_string(fields.size() - 1));
    }
    const auto it = emb.index_.find(std::string(fields[0]));
    double value = 0.0;
    for (int j = 0; j < dim; ++j) {
      if (!parse_double(fields[static_cast<std::size_t>(j) + 1], value)) {
        throw Error(ErrorKind::format,
                    embedding_file.string() + ":" + std::to_string(line_no) + ": non-numeric embedding value");
      }
      if (it != emb.index_.end()) emb.table.value(it->second, j) = value;
    }
    if (it != emb.index_.end()) {
      if (filled[static_cast<std::size_t>(it->second)]) {
        warn("duplicate embedding for '" + it->first + "' at line " + std::to_string(line_no) + "; keeping the last");
      }
      filled[static_cast<std::size_t>(it->second)] = true;
    }
  }
  return emb;
}

EmbeddingMatrix EmbeddingMatrix::from_table(std::vector<std::string> vocab, Matrix table) {
  if (table.rows() != static_cast<Eigen::Index>(vocab.size()) + 1) {
    throw Error(ErrorKind::dimension, "embedding table has " + std::to_string(table.rows()) + " rows for a vocabulary of " +
                                          std::to_string(vocab.size()) + " words plus padding");
  }
  if (!table.row(0).isZero(0.0)) throw Error(ErrorKind::data, "embedding padding row must be zero");
  EmbeddingMatrix emb(static_cast<int>(table.cols()));
  emb.words_ = std::move(vocab);
  for (std::size_t i = 0; i < emb.words_.size(); ++i) {
    if (!emb.index_.emplace(emb.words_[i], static_cast<int>(i) + 1).second) {
      throw Error(ErrorKind::data, "duplicate vocabulary word '" + emb.words_[i] + "'");
    }
  }
  emb.table.value = std::move(table);
  return emb;
}

int EmbeddingMatrix::row_of(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

std::vector<int> EmbeddingMatrix::rows_of(const TokenSequence& tokens) const {
  std::vector<int> rows;
  rows.reserve(tokens.size());
  for (const auto& token : tokens.tokens) rows.push_back(row_of(token));
  return rows;
}

void EmbeddingMatrix::save_text(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write embedding file " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out << words_[i];
    for (int j = 0; j < dim_; ++j) out << ' ' << table.value(static_cast<Eigen::Index>(i) + 1, j);
    out << '\n';
  }
}

EssayMatrix rows_to_matrix(const std::vector<int>& rows, const EmbeddingMatrix& embeddings, int seq_len) {
  if (rows.size() > static_cast<std::size_t>(seq_len)) {
    throw Error(ErrorKind::dimension, "essay has " + std::to_string(rows.size()) + " tokens, limit is " +
                                          std::to_string(seq_len));
  }
  EssayMatrix m = EssayMatrix::Zero(seq_len, embeddings.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = embeddings.table.value.row(rows[i]);
  }
  return m;
}

EssayMatrix essay_to_matrix(const TokenSequence& tokens, const EmbeddingMatrix& embeddings, int seq_len) {
  return rows_to_matrix(embeddings.rows_of(tokens), embeddings, seq_len);
}

Conv1d::Conv1d(const std::string& name, int in_channels, int out_channels, int kernel)
    : weight(name + ".weight", out_channels, static_cast<Eigen::Index>(kernel) * in_channels),
      bias(name + ".bias", 1, out_channels),
      in_(in_channels),
      kernel_(kernel) {}

void Conv1d::init_default(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_ * in_));
  weight.fill_uniform(rng, bound);
  bias.fill_uniform(rng, bound);
}

namespace {

using Windows = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

Windows windows_of(const Matrix& x, int kernel) {
  const Eigen::Index out_rows = x.rows() - kernel + 1;
  return Windows(x.data(), out_rows, kernel * x.cols(), Eigen::OuterStride<>(x.cols()));
}

}  // namespace

Matrix Conv1d::forward(const Matrix& x) const {
  if (x.cols() != in_ || x.rows() < kernel_) {
    throw Error(ErrorKind::dimension, "conv1d input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                          " incompatible with kernel " + std::to_string(kernel_) + " over " +
                                          std::to_string(in_) + " channels");
  }
  Matrix y = windows_of(x, kernel_) * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Conv1d::backward(const Matrix& x, const Matrix& dy) {
  const auto windows = windows_of(x, kernel_);
  if (weight.has_grad()) weight.grad.noalias() += dy.transpose() * windows;
  if (bias.has_grad()) bias.grad.row(0) += dy.colwise().sum();
  const Matrix d_windows = dy * weight.value;
  Matrix dx = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < d_windows.rows(); ++t) {
    Eigen::Map<RowVec<double>>(dx.data() + t * in_, kernel_ * in_) += d_windows.row(t);
  }
  return dx;
}

Matrix MaxPool1d::forward(const Matrix& x, int width, Cache* cache) {
  const Eigen::Index out_rows = x.rows() / width;
  Matrix y(out_rows, x.cols());
  if (cache != nullptr) {
    cache->argmax.assign(static_cast<std::size_t>(out_rows * x.cols()), 0);
    cache->input_rows = x.rows();
  }
  for (Eigen::Index t = 0; t < out_rows; ++t) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = t * width;
      for (Eigen::Index k = 1; k < width; ++k) {
        if (x(t * width + k, c) > x(best, c)) best = t * width + k;
      }
      y(t, c) = x(best, c);
      if (cache != nullptr) cache->argmax[static_cast<std::size_t>(t * x.cols() + c)] = best;
    }
  }
  return y;
}

Matrix MaxPool1d::backward(const Cache& cache, const Matrix& dy) {
  Matrix dx = Matrix::Zero(cache.input_rows, dy.cols());
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    for (Eigen::Index c = 0; c < dy.cols(); ++c) {
      dx(cache.argmax[static_cast<std::size_t>(t * dy.cols() + c)], c) += dy(t, c);
    }
  }
  return dx;
}

void CnnConfig::validate() const {
  if (embed_dim <= 0 || seq_len <= 0 || conv1_channels <= 0 || conv2_channels <= 0 || conv1_kernel <= 0 ||
      conv2_kernel <= 0 || pool1 <= 0 || pool2 <= 0) {
    throw Error(ErrorKind::config, "cnn hyperparameters must be positive");
  }
  const int after_conv1 = seq_len - conv1_kernel + 1;
  const int after_pool1 = after_conv1 / pool1;
  const int after_conv2 = after_pool1 - conv2_kernel + 1;
  const int after_pool2 = after_conv2 / pool2;
  if (after_conv1 < 1 || after_pool1 < 1 || after_conv2 < 1 || after_pool2 < 1) {
    throw Error(ErrorKind::config, "cnn kernels/pools leave no positions for seq_len " + std::to_string(seq_len));
  }
}

CnnBranch::CnnBranch(const CnnConfig& config)
    : conv1("cnn.conv1", config.embed_dim, config.conv1_channels, config.conv1_kernel),
      conv2("cnn.conv2", config.conv1_channels, config.conv2_channels, config.conv2_kernel),
      config_(config) {
  config_.validate();
}

void CnnBranch::init(Rng& rng) {
  conv1.init_default(rng);
  conv2.init_default(rng);
}

Vector CnnBranch::forward(const EssayMatrix& m, Trace* trace) const {
  if (m.rows() != config_.seq_len || m.cols() != config_.embed_dim) {
    throw Error(ErrorKind::dimension, "essay matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                          ", expected " + std::to_string(config_.seq_len) + "x" +
                                          std::to_string(config_.embed_dim));
  }
  Matrix act1 = tanh_forward(conv1.forward(m));
  MaxPool1d::Cache pool1_cache;
  Matrix pooled1 = MaxPool1d::forward(act1, config_.pool1, trace ? &pool1_cache : nullptr);
  Matrix act2 = tanh_forward(conv2.forward(pooled1));
  MaxPool1d::Cache pool2_cache;
  Matrix pooled2 = MaxPool1d::forward(act2, config_.pool2, trace ? &pool2_cache : nullptr);

  Vector out(pooled2.cols());
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(pooled2.cols()));
  for (Eigen::Index c = 0; c < pooled2.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index t = 1; t < pooled2.rows(); ++t) {
      if (pooled2(t, c) > pooled2(best, c)) best = t;
    }
    out(c) = pooled2(best, c);
    argmax[static_cast<std::size_t>(c)] = best;
  }
  if (trace != nullptr) {
    trace->input = m;
    trace->act1 = std::move(act1);
    trace->pool1 = std::move(pool1_cache);
    trace->pooled1 = std::move(pooled1);
    trace->act2 = std::move(act2);
    trace->pool2 = std::move(pool2_cache);
    trace->pooled2 = std::move(pooled2);
    trace->global_argmax = std::move(argmax);
  }
  return out;
}

Matrix CnnBranch::backward(const Trace& trace, const Vector& d_out) {
  Matrix d_pooled2 = Matrix::Zero(trace.pooled2.rows(), trace.pooled2.cols());
  for (Eigen::Index c = 0; c < d_pooled2.cols(); ++c) {
    d_pooled2(trace.global_argmax[static_cast<std::size_t>(c)], c) = d_out(c);
  }
  const Matrix d_act2 = MaxPool1d::backward(trace.pool2, d_pooled2);
  const Matrix d_pooled1 = conv2.backward(trace.pooled1, tanh_backward(trace.act2, d_act2));
  const Matrix d_act1 = MaxPool1d::backward(trace.pool1, d_pooled1);
  return conv1.backward(trace.input, tanh_backward(trace.act1, d_act1));
}

std::vector<Param<double>*> CnnBranch::params() { return {&conv1.weight, &conv1.bias, &conv2.weight, &conv2.bias}; }

}  // namespace emofuse
