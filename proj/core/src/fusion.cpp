#include "emofuse/fusion.hpp"

#include <cmath>

#include "emofuse/error.hpp"

namespace emofuse {

namespace {

void check_size(const char* what, Eigen::Index actual, int expected) {
  if (actual != expected) {
    throw Error(ErrorKind::dimension, std::string(what) + " has " + std::to_string(actual) + " values, expected " +
                                          std::to_string(expected));
  }
}

}  // namespace

Vector fuse(const FeatureBundle& bundle, const FusionDims& dims) {
  check_size("transformer feature", bundle.r.size(), dims.r);
  check_size("cnn feature", bundle.c.size(), dims.c);
  check_size("nrc feature", bundle.n.size(), dims.n);
  Vector out(dims.total());
  out << bundle.r, bundle.c, bundle.n;
  return out;
}

FeatureBundle split_fused(const Vector& fused, const FusionDims& dims) {
  check_size("fused vector", fused.size(), dims.total());
  return FeatureBundle{fused.segment(0, dims.r), fused.segment(dims.r, dims.c), fused.segment(dims.r + dims.c, dims.n)};
}

Vector to_vector(const EmotionVector& v) {
  Vector out(static_cast<Eigen::Index>(kNrcEmotions));
  for (std::size_t i = 0; i < kNrcEmotions; ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

ClassificationHead::ClassificationHead(int input_dim, int num_labels) : layer_("head", input_dim, num_labels) {
  if (input_dim < 1 || num_labels < 1) throw Error(ErrorKind::config, "head sizes must be positive");
}

void ClassificationHead::init(Rng& rng) {
  layer_.weight.fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(input_dim())));
  layer_.bias.value.setZero();
}

Vector ClassificationHead::logits(const Vector& fused) const {
  if (fused.size() != input_dim()) {
    throw Error(ErrorKind::dimension, "classification head expects " + std::to_string(input_dim()) +
                                          " inputs, got " + std::to_string(fused.size()));
  }
  return layer_.weight.value * fused + layer_.bias.value.row(0).transpose();
}

Vector ClassificationHead::backward(const Vector& fused, const Vector& d_logits) {
  const Matrix dx = layer_.backward(Matrix(fused.transpose()), Matrix(d_logits.transpose()));
  return dx.row(0).transpose();
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

ClassDistribution classify(const Vector& fused, const ClassificationHead& head) {
  return ClassDistribution{softmax(head.logits(fused))};
}

LabelIndex predict(const Vector& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = i;
  }
  return static_cast<LabelIndex>(best);
}

LabelIndex predict(const ClassDistribution& d) { return predict(d.probs); }

double cross_entropy(const Vector& logits, LabelIndex gold, Vector* d_logits) {
  if (gold < 0 || gold >= logits.size()) throw Error(ErrorKind::data, "gold label outside head output range");
  const double m = logits.maxCoeff();
  const double log_sum = m + std::log((logits.array() - m).exp().sum());
  if (d_logits != nullptr) {
    *d_logits = (logits.array() - log_sum).exp().matrix();
    (*d_logits)(gold) -= 1.0;
  }
  return log_sum - logits(gold);
}

}  // namespace emofuse
