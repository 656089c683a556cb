#include "emofuse/optim.hpp"

#include <cmath>

namespace emofuse {

void AdamW::zero_grad() {
  for (auto& s : doubles_) s.param->zero_grad();
  for (auto& s : floats_) s.param->zero_grad();
}

template <typename S>
void AdamW::update(Slot<S>& slot, double bias1, double bias2) {
  Param<S>& p = *slot.param;
  if (!p.has_grad()) return;
  if (slot.m.size() != p.value.size()) {
    slot.m = Mat<S>::Zero(p.value.rows(), p.value.cols());
    slot.v = Mat<S>::Zero(p.value.rows(), p.value.cols());
  }
  const auto b1 = static_cast<S>(options_.beta1);
  const auto b2 = static_cast<S>(options_.beta2);
  const auto lr = static_cast<S>(options_.lr);
  const auto eps = static_cast<S>(options_.eps);
  if (options_.weight_decay != 0.0) p.value *= static_cast<S>(1.0 - options_.lr * options_.weight_decay);
  slot.m = b1 * slot.m + (S(1) - b1) * p.grad;
  slot.v = b2 * slot.v + (S(1) - b2) * p.grad.cwiseProduct(p.grad);
  const auto c1 = static_cast<S>(bias1);
  const auto c2 = static_cast<S>(std::sqrt(bias2));
  p.value.array() -= lr * (slot.m.array() / c1) / (slot.v.array().sqrt() / c2 + eps);
}

void AdamW::step() {
  ++t_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (auto& s : doubles_) update(s, bias1, bias2);
  for (auto& s : floats_) update(s, bias1, bias2);
}

}  // namespace emofuse
