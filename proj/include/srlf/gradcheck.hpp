#pragma once

#include "srlf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace srlf {

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  Eigen::Index entries = 0;
  Eigen::Index kinks = 0;  // non-differentiable points, excluded from the error
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double tolerance = 1e-4;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() < tolerance; }
};

/// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central differences
/// (f(x+h) - f(x-h)) / 2h for every entry of every parameter. The relative
/// error is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|). Frozen padding rows are
/// skipped, and so are entries whose one-sided slopes disagree by more than
/// `kink_tol` (a ReLU or max input sits within h of its switching point, where
/// central differences measure neither subgradient).
inline GradCheckReport gradcheck(const LossBuilder& loss, const std::vector<Parameter*>& params, double h = 1e-5,
                                 double tol = 1e-4, std::optional<Op> fault = std::nullopt,
                                 double kink_tol = 1e-3) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.inject_fault(fault);
    Var root = loss(tape);
    tape.backward(root);
  }
  auto evaluate = [&loss]() {
    Tape tape;
    return loss(tape).scalar();
  };

  const double center = evaluate();
  GradCheckReport report;
  report.tolerance = tol;
  for (auto* p : params) {
    GradCheckGroup group{p->name, 0.0, 0};
    const Matrix analytic = p->grad;
    for (Eigen::Index r = p->pad_row_frozen ? 1 : 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double saved = p->value(r, c);
        p->value(r, c) = saved + h;
        const double up = evaluate();
        p->value(r, c) = saved - h;
        const double down = evaluate();
        p->value(r, c) = saved;
        const double forward = (up - center) / h;
        const double backward = (center - down) / h;
        if (std::abs(forward - backward) / std::max({1.0, std::abs(forward), std::abs(backward)}) > kink_tol) {
          ++group.kinks;
          continue;
        }
        const double numeric = (up - down) / (2.0 * h);
        const double ad = analytic(r, c);
        const double err = std::abs(ad - numeric) / std::max({1.0, std::abs(ad), std::abs(numeric)});
        group.max_rel_error = std::max(group.max_rel_error, err);
        ++group.entries;
      }
    }
    report.groups.push_back(group);
  }
  for (auto* p : params) p->zero_grad();
  return report;
}

}  // namespace srlf
