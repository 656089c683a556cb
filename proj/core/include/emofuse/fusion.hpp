#pragma once

#include <span>
#include <vector>

#include "emofuse/corpus.hpp"
#include "emofuse/nn.hpp"
#include "emofuse/nrc.hpp"

namespace emofuse {

/// Per-essay branch outputs: processed transformer vector, CNN feature and
/// NRC intensity sums. Absent branches are empty vectors.
struct FeatureBundle {
  Vector r;
  Vector c;
  Vector n;
};

struct FusionDims {
  int r = 768;
  int c = 16;
  int n = static_cast<int>(kNrcEmotions);

  int total() const { return r + c + n; }
  bool operator==(const FusionDims&) const = default;
};

/// [r; c; n]. Throws Error(dimension) when a component's size differs from
/// `dims`.
Vector fuse(const FeatureBundle& bundle, const FusionDims& dims);

/// Inverse of fuse().
FeatureBundle split_fused(const Vector& fused, const FusionDims& dims);

Vector to_vector(const EmotionVector& v);

struct ClassDistribution {
  Vector probs;
};

/// Single linear layer over the fused vector; softmax gives the class
/// distribution.
class ClassificationHead {
 public:
  ClassificationHead() = default;
  ClassificationHead(int input_dim, int num_labels);

  int input_dim() const { return layer_.in_features(); }
  int num_labels() const { return layer_.out_features(); }

  /// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias.
  void init(Rng& rng);

  /// Throws Error(dimension) on a size mismatch.
  Vector logits(const Vector& fused) const;
  /// Accumulates parameter gradients; returns dL/d(fused).
  Vector backward(const Vector& fused, const Vector& d_logits);

  std::vector<Param<double>*> params() { return layer_.params(); }
  Linear<double>& linear() { return layer_; }
  const Linear<double>& linear() const { return layer_; }

 private:
  Linear<double> layer_;
};

Vector softmax(const Vector& logits);

/// softmax(W f + b).
ClassDistribution classify(const Vector& fused, const ClassificationHead& head);

/// Argmax with ties broken toward the lowest index.
LabelIndex predict(const ClassDistribution& d);
LabelIndex predict(const Vector& scores);

/// -log p[gold] computed from logits; `d_logits` receives p - onehot.
double cross_entropy(const Vector& logits, LabelIndex gold, Vector* d_logits = nullptr);

}  // namespace emofuse
