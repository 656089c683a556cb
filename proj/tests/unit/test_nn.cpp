#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "emofuse/nn.hpp"
#include "test_support.hpp"

using namespace emofuse;

TEST(Rng, SameSeedAndStreamRepeat) {
  Rng a(42, 3);
  Rng b(42, 3);
  Rng c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(5, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Permutation, IsAPermutationAndSeeded) {
  Rng a(7, 3);
  Rng b(7, 3);
  const auto p = permutation(50, a);
  EXPECT_EQ(p, permutation(50, b));
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
}

TEST(Linear, ForwardAndGradients) {
  Linear<double> lin("l", 5, 3);
  Rng rng(3, 1);
  lin.init_default(rng);
  const Matrix x = Matrix::Random(4, 5);
  const Matrix w = Matrix::Random(4, 3);
  const Matrix y = lin.forward(x);
  for (Eigen::Index r = 0; r < 4; ++r) {
    const Vector expected = lin.weight.value * x.row(r).transpose() + lin.bias.value.row(0).transpose();
    EXPECT_TRUE(y.row(r).transpose().isApprox(expected, 1e-12));
  }
  const auto loss = [&] { return (lin.forward(x).array() * w.array()).sum(); };
  for (auto* p : lin.params()) p->zero_grad();
  lin.backward(x, w);
  std::mt19937_64 gen(1);
  for (auto* p : lin.params()) EXPECT_LT(emofuse::testing::max_relative_error(*p, loss, 15, gen), 1e-8);
}

TEST(Linear, FrozenParametersGetNoGradient) {
  Linear<double> lin("l", 2, 2);
  for (auto* p : lin.params()) p->trainable = false;
  for (auto* p : lin.params()) p->zero_grad();
  lin.backward(Matrix::Ones(1, 2), Matrix::Ones(1, 2));
  EXPECT_FALSE(lin.weight.has_grad());
  EXPECT_EQ(lin.weight.grad.size(), 0);
}

TEST(LayerNorm, NormalizesAndBackpropagates) {
  LayerNorm<double> ln("ln", 6, 1e-5);
  ln.gamma.value.setRandom();
  ln.beta.value.setRandom();
  const Matrix x = Matrix::Random(3, 6) * 4.0;
  LayerNorm<double>::Cache cache;
  ln.forward(x, &cache);
  for (Eigen::Index r = 0; r < 3; ++r) {
    EXPECT_NEAR(cache.normalized.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(cache.normalized.row(r).squaredNorm() / 6.0, 1.0, 1e-4);
  }
  const Matrix w = Matrix::Random(3, 6);
  for (auto* p : ln.params()) p->zero_grad();
  const Matrix dx = ln.backward(cache, w);
  const auto loss = [&] { return (ln.forward(x, nullptr).array() * w.array()).sum(); };
  std::mt19937_64 gen(4);
  for (auto* p : ln.params()) EXPECT_LT(emofuse::testing::max_relative_error(*p, loss, 6, gen), 1e-7);
  Param<double> input("x", 3, 6);
  input.value = x;
  input.grad = dx;
  const auto input_loss = [&] { return (ln.forward(input.value, nullptr).array() * w.array()).sum(); };
  EXPECT_LT(emofuse::testing::max_relative_error(input, input_loss, 18, gen), 1e-6);
}

TEST(Activations, GeluIsExactErfForm) {
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  const Matrix y = gelu_forward(x);
  EXPECT_NEAR(y(0, 0), -0.15865525393145707, 1e-12);
  EXPECT_NEAR(y(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(y(0, 2), 1.9544997361036416, 1e-12);
}

TEST(Activations, DerivativesMatchFiniteDifferences) {
  const Matrix x = Matrix::Random(2, 5) * 3.0;
  const Matrix ones = Matrix::Ones(2, 5);
  const Matrix g = gelu_backward(x, ones);
  const Matrix t = tanh_backward(tanh_forward(x), ones);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix up = x, down = x;
    up.data()[i] += h;
    down.data()[i] -= h;
    EXPECT_NEAR(g.data()[i], (gelu_forward(up) - gelu_forward(down)).sum() / (2 * h), 1e-7);
    EXPECT_NEAR(t.data()[i], (tanh_forward(up) - tanh_forward(down)).sum() / (2 * h), 1e-7);
  }
}

TEST(Dropout, MaskValuesAndRate) {
  Rng r(1, 2);
  const auto mask = dropout_mask<double>(100, 100, 0.2, r);
  const double zeros = static_cast<double>((mask.array() == 0.0).count());
  EXPECT_NEAR(zeros / 10000.0, 0.2, 0.02);
  EXPECT_TRUE(((mask.array() == 0.0) || ((mask.array() - 1.25).abs() < 1e-12)).all());
}
