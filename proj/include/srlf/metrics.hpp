#pragma once

#include "srlf/labels.hpp"

#include <span>
#include <vector>

namespace srlf {

/// Square count matrix, rows = true class, columns = predicted class.
class Confusion {
 public:
  explicit Confusion(int classes = kClassCount);

  void add(int truth, int predicted);
  /// Element-wise sum; merging partial matrices is associative.
  void merge(const Confusion& other);

  long at(int truth, int predicted) const;
  int classes() const { return classes_; }
  long total() const;
  long support(int truth) const;

  bool operator==(const Confusion&) const = default;

 private:
  int classes_;
  std::vector<long> counts_;
};

/// F1_c = 2 TP / (2 TP + FP + FN), 0 when the denominator is 0.
std::vector<double> f1_per_class(const Confusion& confusion);

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> f1;  // NR, FR, TR, UR
  double macro_f1 = 0.0;
  Confusion confusion;
};

Metrics metrics_from(const Confusion& confusion);
Metrics metrics_from(std::span<const int> truth, std::span<const int> predicted, int classes = kClassCount);

}  // namespace srlf
