#pragma once

// Dense building blocks with explicit forward/backward passes. Activations
// are row-major matrices with one row per position (or one row per example
// for single-vector layers). Gradients accumulate into Param::grad until
// zero_grad() is called.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace emofuse {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Matrix = Mat<double>;
using Vector = Eigen::VectorXd;

enum class Mode { train, eval };

/// Seeded generator with a fixed, platform-independent output sequence.
/// Only the raw mt19937_64 stream is used; distributions are derived here
/// because std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(mix(seed, stream)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

/// Random permutation of 0..n-1 (Fisher-Yates over Rng::below).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat<S>::Zero(rows, cols)) {}

  void zero_grad() {
    if (trainable) {
      grad.setZero(value.rows(), value.cols());
    } else {
      grad.resize(0, 0);
    }
  }

  void fill_uniform(Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      value.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
    }
  }

  void fill_normal(Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      value.data()[i] = static_cast<S>(rng.normal() * stddev);
    }
  }

  bool has_grad() const { return trainable && grad.size() == value.size(); }
};

/// y = x W^T + b, with W stored (out, in) like the usual checkpoint layout.
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }

  /// PyTorch default: U(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  void init_default(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    weight.fill_uniform(rng, bound);
    bias.fill_uniform(rng, bound);
  }

  Mat<S> forward(const Mat<S>& x) const {
    Mat<S> y = x * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx.
  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy) {
    if (weight.has_grad()) weight.grad.noalias() += dy.transpose() * x;
    if (bias.has_grad()) bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value;
  }

  std::vector<Param<S>*> params() { return {&weight, &bias}; }

  Param<S> weight;
  Param<S> bias;
};

template <typename S>
class LayerNorm {
 public:
  struct Cache {
    Mat<S> normalized;
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim, double eps)
      : gamma(name + ".weight", 1, dim), beta(name + ".bias", 1, dim), eps_(eps) {
    gamma.value.setOnes();
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    const auto n = x.cols();
    Mat<S> xhat(x.rows(), n);
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const S mean = x.row(r).mean();
      const RowVec<S> centered = x.row(r).array() - mean;
      const S var = centered.squaredNorm() / static_cast<S>(n);
      inv_std(r) = S(1) / std::sqrt(var + static_cast<S>(eps_));
      xhat.row(r) = centered * inv_std(r);
    }
    Mat<S> y = (xhat.array().rowwise() * gamma.value.row(0).array()).matrix();
    y.rowwise() += beta.value.row(0);
    if (cache != nullptr) {
      cache->normalized = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Mat<S> backward(const Cache& cache, const Mat<S>& dy) {
    const auto& xhat = cache.normalized;
    if (gamma.has_grad()) gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    if (beta.has_grad()) beta.grad.row(0) += dy.colwise().sum();
    const Mat<S> dxhat = (dy.array().rowwise() * gamma.value.row(0).array()).matrix();
    const S n = static_cast<S>(dy.cols());
    Mat<S> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const S sum_d = dxhat.row(r).sum();
      const S sum_dx = dxhat.row(r).dot(xhat.row(r));
      dx.row(r) = (cache.inv_std(r) / n) *
                  (n * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx).matrix();
    }
    return dx;
  }

  std::vector<Param<S>*> params() { return {&gamma, &beta}; }

  Param<S> gamma;
  Param<S> beta;

 private:
  double eps_ = 1e-5;
};

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat<S> mask(rows, cols);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < p ? S(0) : keep_scale;
  }
  return mask;
}

template <typename S>
Mat<S> tanh_forward(const Mat<S>& x) {
  return x.array().tanh().matrix();
}

/// Gradient through tanh given its output y.
template <typename S>
Mat<S> tanh_backward(const Mat<S>& y, const Mat<S>& dy) {
  return (dy.array() * (S(1) - y.array().square())).matrix();
}

/// Exact (erf-based) GELU.
template <typename S>
Mat<S> gelu_forward(const Mat<S>& x) {
  return x.unaryExpr([](S v) { return S(0.5) * v * (S(1) + std::erf(v / std::sqrt(S(2)))); });
}

template <typename S>
Mat<S> gelu_backward(const Mat<S>& x, const Mat<S>& dy) {
  const Mat<S> deriv = x.unaryExpr([](S v) {
    const S cdf = S(0.5) * (S(1) + std::erf(v / std::sqrt(S(2))));
    const S pdf = std::exp(S(-0.5) * v * v) / std::sqrt(S(2) * S(M_PI));
    return cdf + v * pdf;
  });
  return (dy.array() * deriv.array()).matrix();
}

/// Row-wise numerically stable softmax.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& x) {
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// Gradient through a row-wise softmax given its output p.
template <typename S>
Mat<S> softmax_rows_backward(const Mat<S>& p, const Mat<S>& dp) {
  Mat<S> dx(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const S dot = p.row(r).dot(dp.row(r));
    dx.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
  }
  return dx;
}

}  // namespace emofuse
