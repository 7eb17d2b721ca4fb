#pragma once

#include "srlf/tensor.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace srlf {

enum class Direction { descent, ascent };

/// Bias-corrected Adam. Moment buffers are created lazily on the first step
/// and keyed by position in the parameter list, which must stay stable.
template <typename Scalar>
struct BasicAdamState {
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  long step = 0;
  std::vector<MatrixX<Scalar>> first_moment;
  std::vector<MatrixX<Scalar>> second_moment;
};

using AdamState = BasicAdamState<double>;

template <typename Scalar>
void adam_step(std::span<BasicParameter<Scalar>* const> params, BasicAdamState<Scalar>& state, Direction direction) {
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
      state.second_moment.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_step: parameter list changed size");
  ++state.step;
  const Scalar bc1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  const Scalar sign = direction == Direction::descent ? Scalar(-1) : Scalar(1);
  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicParameter<Scalar>& p = *params[i];
    MatrixX<Scalar>& m = state.first_moment[i];
    MatrixX<Scalar>& v = state.second_moment[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || m.rows() != p.value.rows() ||
        m.cols() != p.value.cols()) {
      throw DimensionError("adam_step: gradient or moment shape differs for " + p.name);
    }
    m = state.beta1 * m + (Scalar(1) - state.beta1) * p.grad;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * p.grad.cwiseAbs2();
    MatrixX<Scalar> delta =
        ((m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon)).matrix() * (sign * state.learning_rate);
    if (p.pad_row_frozen && delta.rows() > 0) delta.row(0).setZero();
    p.value += delta;
    if (!p.value.allFinite()) throw NumericError("adam_step: non-finite value in " + p.name);
  }
}

template <typename Scalar>
void adam_step(const std::vector<BasicParameter<Scalar>*>& params, BasicAdamState<Scalar>& state,
               Direction direction) {
  adam_step(std::span<BasicParameter<Scalar>* const>(params.data(), params.size()), state, direction);
}

}  // namespace srlf
