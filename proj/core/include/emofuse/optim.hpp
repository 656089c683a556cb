#pragma once

#include <vector>

#include "emofuse/nn.hpp"

namespace emofuse {

struct AdamWOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay:
///   p <- p - lr*wd*p;  m,v updated;  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Frozen parameters are skipped.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options) : options_(options) {}

  void add(Param<double>* p) { doubles_.push_back({p, {}, {}}); }
  void add(Param<float>* p) { floats_.push_back({p, {}, {}}); }
  template <typename Range>
  void add_all(const Range& params) {
    for (auto* p : params) add(p);
  }

  void zero_grad();
  void step();

  long long steps() const { return t_; }
  const AdamWOptions& options() const { return options_; }

 private:
  template <typename S>
  struct Slot {
    Param<S>* param;
    Mat<S> m;
    Mat<S> v;
  };
  template <typename S>
  void update(Slot<S>& slot, double bias1, double bias2);

  AdamWOptions options_;
  long long t_ = 0;
  std::vector<Slot<double>> doubles_;
  std::vector<Slot<float>> floats_;
};

}  // namespace emofuse
