#include "emofuse/metrics.hpp"

#include <numeric>

#include "emofuse/error.hpp"

namespace emofuse {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw Error(ErrorKind::data, "confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted,
                                 std::size_t num_classes)
    : ConfusionMatrix(num_classes) {
  if (gold.size() != predicted.size()) {
    throw Error(ErrorKind::dimension, "gold has " + std::to_string(gold.size()) + " labels, predictions have " +
                                          std::to_string(predicted.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) add(gold[i], predicted[i]);
}

void ConfusionMatrix::add(LabelIndex gold, LabelIndex predicted) {
  if (gold < 0 || predicted < 0 || static_cast<std::size_t>(gold) >= n_ || static_cast<std::size_t>(predicted) >= n_) {
    throw Error(ErrorKind::data, "label index outside confusion matrix");
  }
  ++counts_[static_cast<std::size_t>(gold) * n_ + static_cast<std::size_t>(predicted)];
  ++total_;
}

double ConfusionMatrix::accuracy() const {
  if (total_ == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < n_; ++c) correct += at(c, c);
  return static_cast<double>(correct) / static_cast<double>(total_);
}

std::vector<double> ConfusionMatrix::f1_per_class() const {
  std::vector<double> f1(n_, 0.0);
  for (std::size_t c = 0; c < n_; ++c) {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      predicted += at(k, c);
      actual += at(c, k);
    }
    const auto tp = static_cast<double>(at(c, c));
    const double precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    const double recall = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
    f1[c] = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return f1;
}

double ConfusionMatrix::macro_f1() const {
  const auto f1 = f1_per_class();
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(n_);
}

double accuracy(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted) {
  if (gold.size() != predicted.size()) throw Error(ErrorKind::dimension, "gold/prediction length mismatch");
  if (gold.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == predicted[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double macro_f1(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted, std::size_t num_classes) {
  return ConfusionMatrix(gold, predicted, num_classes).macro_f1();
}

}  // namespace emofuse
