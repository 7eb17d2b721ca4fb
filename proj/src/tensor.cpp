#include "srlf/tensor.hpp"

namespace srlf {

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::add_row: return "add_row";
    case Op::mul_col: return "mul_col";
    case Op::scale: return "scale";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::log: return "log";
    case Op::softmax_rows: return "softmax_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::concat_rows: return "concat_rows";
    case Op::slice_cols: return "slice_cols";
    case Op::slice_rows: return "slice_rows";
    case Op::repeat_rows: return "repeat_rows";
    case Op::transpose: return "transpose";
    case Op::reshape: return "reshape";
    case Op::gather_rows: return "gather_rows";
    case Op::windows: return "windows";
    case Op::max_over_time: return "max_over_time";
    case Op::sum: return "sum";
    case Op::pick: return "pick";
    case Op::squared_norm: return "squared_norm";
  }
  return "unknown";
}

std::optional<Op> op_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Op::squared_norm); ++i) {
    const auto op = static_cast<Op>(i);
    if (name == op_name(op)) return op;
  }
  return std::nullopt;
}

}  // namespace srlf
