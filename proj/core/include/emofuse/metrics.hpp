#pragma once

#include <span>
#include <string>
#include <vector>

#include "emofuse/corpus.hpp"

namespace emofuse {

/// counts(gold, predicted).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  ConfusionMatrix(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted, std::size_t num_classes);

  void add(LabelIndex gold, LabelIndex predicted);

  std::size_t num_classes() const { return n_; }
  std::size_t total() const { return total_; }
  std::size_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold * n_ + predicted]; }

  double accuracy() const;
  /// Per-class F1; 0 whenever precision + recall is 0 or undefined.
  std::vector<double> f1_per_class() const;
  /// Unweighted mean of f1_per_class() over every class.
  double macro_f1() const;

 private:
  std::size_t n_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

double accuracy(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted);
double macro_f1(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted, std::size_t num_classes);

struct RunMetrics {
  std::string split;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  long long seed = 0;
  int epochs_run = 0;
  double loss = 0.0;
};

}  // namespace emofuse
