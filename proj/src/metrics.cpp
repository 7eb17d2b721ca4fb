#include "srlf/metrics.hpp"

#include <numeric>
#include <stdexcept>

namespace srlf {

Confusion::Confusion(int classes) : classes_(classes), counts_(static_cast<std::size_t>(classes * classes), 0) {
  if (classes < 1) throw std::invalid_argument("confusion: need at least one class");
}

void Confusion::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw std::out_of_range("confusion: class index out of range");
  }
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

void Confusion::merge(const Confusion& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("confusion: class count differs");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

long Confusion::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth * classes_ + predicted));
}

long Confusion::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

long Confusion::support(int truth) const {
  long s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::vector<double> f1_per_class(const Confusion& confusion) {
  const int r = confusion.classes();
  std::vector<double> f1(static_cast<std::size_t>(r), 0.0);
  for (int c = 0; c < r; ++c) {
    long tp = confusion.at(c, c);
    long fp = 0;
    long fn = 0;
    for (int o = 0; o < r; ++o) {
      if (o == c) continue;
      fp += confusion.at(o, c);
      fn += confusion.at(c, o);
    }
    const long denom = 2 * tp + fp + fn;
    f1[static_cast<std::size_t>(c)] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

Metrics metrics_from(const Confusion& confusion) {
  Metrics m;
  m.confusion = confusion;
  long correct = 0;
  for (int c = 0; c < confusion.classes(); ++c) correct += confusion.at(c, c);
  const long total = confusion.total();
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  m.f1 = f1_per_class(confusion);
  m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / static_cast<double>(m.f1.size());
  return m;
}

Metrics metrics_from(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("metrics: label/prediction counts differ");
  Confusion c(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return metrics_from(c);
}

}  // namespace srlf
