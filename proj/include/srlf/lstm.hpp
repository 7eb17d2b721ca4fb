#pragma once

#include "srlf/tensor.hpp"

#include <vector>

namespace srlf {

/// One LSTM direction. Gate columns are laid out [input | forget | candidate | output],
/// each `hidden` wide.
template <typename Scalar>
struct BasicLstmParams {
  BasicParameter<Scalar> input_weights;      // in x 4h
  BasicParameter<Scalar> recurrent_weights;  // h x 4h
  BasicParameter<Scalar> bias;               // 1 x 4h

  Eigen::Index hidden() const { return recurrent_weights.value.rows(); }
  Eigen::Index input_size() const { return input_weights.value.rows(); }
  std::vector<BasicParameter<Scalar>*> all() { return {&input_weights, &recurrent_weights, &bias}; }
};

using LstmParams = BasicLstmParams<double>;

/// Runs one direction over the rows of `x` (N x in) from a zero state and
/// returns the N x h hidden states, row n aligned with input row n.
template <typename Scalar>
BasicVar<Scalar> lstm_direction(const BasicVar<Scalar>& x, BasicLstmParams<Scalar>& p, bool trainable, bool reverse) {
  BasicTape<Scalar>& tape = x.tape();
  const Eigen::Index n = x.rows();
  const Eigen::Index h = p.hidden();
  if (x.cols() != p.input_size()) throw DimensionError("lstm: input width differs from parameter shape");
  if (n == 0) throw DimensionError("lstm: empty sequence");

  auto wx = tape.bind(p.input_weights, trainable);
  auto wh = tape.bind(p.recurrent_weights, trainable);
  auto b = tape.bind(p.bias, trainable);
  auto projected = add_row(matmul(x, wx), b);

  std::vector<BasicVar<Scalar>> outputs(static_cast<std::size_t>(n));
  BasicVar<Scalar> hidden_state, cell;
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index row = reverse ? n - 1 - step : step;
    auto gates = slice_rows(projected, row, Eigen::Index(1));
    if (step > 0) gates = add(gates, matmul(hidden_state, wh));
    auto input_gate = sigmoid(slice_cols(gates, Eigen::Index(0), h));
    auto forget_gate = sigmoid(slice_cols(gates, h, h));
    auto candidate = tanh(slice_cols(gates, 2 * h, h));
    auto output_gate = sigmoid(slice_cols(gates, 3 * h, h));
    cell = step > 0 ? add(mul(forget_gate, cell), mul(input_gate, candidate)) : mul(input_gate, candidate);
    hidden_state = mul(output_gate, tanh(cell));
    outputs[static_cast<std::size_t>(row)] = hidden_state;
  }
  return concat_rows(std::span<const BasicVar<Scalar>>(outputs));
}

/// [forward(x), backward(x)] : N x (h_fwd + h_bwd).
template <typename Scalar>
BasicVar<Scalar> lstm_bidirectional(const BasicVar<Scalar>& x, BasicLstmParams<Scalar>& forward,
                                    BasicLstmParams<Scalar>& backward, bool trainable) {
  auto fwd = lstm_direction(x, forward, trainable, false);
  auto bwd = lstm_direction(x, backward, trainable, true);
  return concat_cols({fwd, bwd});
}

}  // namespace srlf
