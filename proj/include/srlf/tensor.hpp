#pragma once

// Dense 2-D tensors with a reverse-mode tape.
//
// Every value is a row-major Eigen matrix; vectors are 1 x n rows. A tape
// records each operation in execution order, so the node list is always
// topologically sorted and backward() is a single reverse sweep.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace srlf {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable matrix together with its gradient accumulator.
template <typename Scalar>
struct BasicParameter {
  std::string name;
  MatrixX<Scalar> value;
  MatrixX<Scalar> grad;
  /// Row 0 is a padding row: it never receives gradient or updates.
  bool pad_row_frozen = false;

  BasicParameter() = default;
  BasicParameter(std::string n, MatrixX<Scalar> v, bool frozen_pad_row = false)
      : name(std::move(n)),
        value(std::move(v)),
        grad(MatrixX<Scalar>::Zero(value.rows(), value.cols())),
        pad_row_frozen(frozen_pad_row) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

enum class Op : std::uint8_t {
  constant,
  parameter,
  matmul,
  add,
  sub,
  mul,
  add_row,
  mul_col,
  scale,
  relu,
  sigmoid,
  tanh,
  log,
  softmax_rows,
  concat_cols,
  concat_rows,
  slice_cols,
  slice_rows,
  repeat_rows,
  transpose,
  reshape,
  gather_rows,
  windows,
  max_over_time,
  sum,
  pick,
  squared_norm,
};

const char* op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class BasicVar {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicVar() = default;
  BasicVar(BasicTape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const { return tape_->value(id_); }
  const Matrix& grad() const { return tape_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  BasicTape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = MatrixX<Scalar>;
  using Var = BasicVar<Scalar>;
  using Parameter = BasicParameter<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, const Matrix&)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var constant(Matrix value) { return push(Op::constant, std::move(value), false, nullptr); }

  /// Leaf bound to a parameter; backward accumulates into parameter.grad.
  Var parameter(Parameter& p) {
    Parameter* target = &p;
    return push(Op::parameter, p.value, true, [target](BasicTape&, const Matrix& g) {
      if (target->grad.rows() != g.rows() || target->grad.cols() != g.cols()) {
        target->grad.setZero(g.rows(), g.cols());
      }
      target->grad += g;
      if (target->pad_row_frozen && target->grad.rows() > 0) target->grad.row(0).setZero();
    });
  }

  /// Trainable leaf when `trainable`, otherwise a constant copy of the value.
  Var bind(Parameter& p, bool trainable) { return trainable ? parameter(p) : constant(p.value); }

  /// Appends an operation result. `inputs` decide whether the node is on a
  /// differentiable path; the backward rule is dropped when it is not.
  Var record(Op op, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v.id());
    return push(op, std::move(value), needs, needs ? std::move(backward) : nullptr);
  }
  Var record(Op op, Matrix value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v.id());
    return push(op, std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  /// Reverse sweep from a 1 x 1 root. Parameter grads are accumulated, not reset.
  void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1) {
      throw DimensionError("backward: root must be a 1x1 scalar, got " + std::to_string(root.rows()) +
                           "x" + std::to_string(root.cols()));
    }
    if (!requires_grad(root.id())) return;
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      if (fault_ && *fault_ == n.op) n.grad *= fault_factor_;
      if (!n.grad.allFinite()) throw NumericError(std::string("non-finite gradient at ") + op_name(n.op));
      n.backward(*this, n.grad);
    }
  }

  /// Adds `delta` into the gradient buffer of node `id` if it is differentiable.
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  /// Zero-initialized gradient buffer for scatter-style backward rules.
  Matrix& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Op op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Test hook: scales the incoming gradient of every node of kind `op`,
  /// which corrupts that operation's backward rule.
  void inject_fault(std::optional<Op> op, Scalar factor = Scalar(1.5)) {
    fault_ = op;
    fault_factor_ = factor;
  }

 private:
  struct Node {
    Op op;
    Matrix value;
    Matrix grad;
    bool requires_grad;
    BackwardFn backward;
  };

  Var push(Op op, Matrix value, bool needs, BackwardFn backward) {
    if (!value.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op_name(op));
    nodes_.push_back(Node{op, std::move(value), Matrix(), needs, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::optional<Op> fault_;
  Scalar fault_factor_ = Scalar(1.5);
};

using Matrix = MatrixX<double>;
using Parameter = BasicParameter<double>;
using Tape = BasicTape<double>;
using Var = BasicVar<double>;

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Scalar>
void require_same_shape(const char* what, const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ (" + detail::shape_str(a.rows(), a.cols()) + " x " +
                         detail::shape_str(b.rows(), b.cols()) + ")");
  }
  MatrixX<Scalar> out = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Op::matmul, std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

template <typename Scalar>
BasicVar<Scalar> transpose(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out = a.value().transpose();
  const std::size_t ia = a.id();
  return a.tape().record(Op::transpose, std::move(out), {a},
                         [ia](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) { t.accumulate(ia, g.transpose()); });
}

/// Row-major reinterpretation to rows x cols.
template <typename Scalar>
BasicVar<Scalar> reshape(const BasicVar<Scalar>& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: " + detail::shape_str(a.rows(), a.cols()) + " cannot become " +
                         detail::shape_str(rows, cols));
  }
  MatrixX<Scalar> out = Eigen::Map<const MatrixX<Scalar>>(a.value().data(), rows, cols);
  const std::size_t ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape().record(Op::reshape, std::move(out), {a}, [ia, r0, c0](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, Eigen::Map<const MatrixX<Scalar>>(g.data(), r0, c0));
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
BasicVar<Scalar> add(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  MatrixX<Scalar> out = a.value() + b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Op::add, std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename Scalar>
BasicVar<Scalar> sub(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  MatrixX<Scalar> out = a.value() - b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Op::sub, std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

template <typename Scalar>
BasicVar<Scalar> mul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  MatrixX<Scalar> out = a.value().cwiseProduct(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Op::mul, std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

/// a (m x n) plus a broadcast 1 x n row, e.g. a bias.
template <typename Scalar>
BasicVar<Scalar> add_row(const BasicVar<Scalar>& a, const BasicVar<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                         detail::shape_str(row.rows(), row.cols()));
  }
  MatrixX<Scalar> out = a.value().rowwise() + row.value().row(0);
  const std::size_t ia = a.id(), ib = row.id();
  return a.tape().record(Op::add_row, std::move(out), {a, row}, [ia, ib](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

/// Scales row i of a (m x n) by w(i), w being m x 1.
template <typename Scalar>
BasicVar<Scalar> mul_col(const BasicVar<Scalar>& a, const BasicVar<Scalar>& w) {
  if (w.cols() != 1 || w.rows() != a.rows()) {
    throw DimensionError("mul_col: expected " + std::to_string(a.rows()) + "x1 weights, got " +
                         detail::shape_str(w.rows(), w.cols()));
  }
  MatrixX<Scalar> out = w.value().col(0).asDiagonal() * a.value();
  const std::size_t ia = a.id(), iw = w.id();
  return a.tape().record(Op::mul_col, std::move(out), {a, w}, [ia, iw](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, t.value(iw).col(0).asDiagonal() * g);
    if (t.requires_grad(iw)) t.accumulate(iw, g.cwiseProduct(t.value(ia)).rowwise().sum());
  });
}

template <typename Scalar>
BasicVar<Scalar> scale(const BasicVar<Scalar>& a, Scalar s) {
  MatrixX<Scalar> out = a.value() * s;
  const std::size_t ia = a.id();
  return a.tape().record(Op::scale, std::move(out), {a},
                         [ia, s](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) { t.accumulate(ia, g * s); });
}

/// max(0, x); the subgradient at 0 is 0.
template <typename Scalar>
BasicVar<Scalar> relu(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out = a.value().cwiseMax(Scalar(0));
  const std::size_t ia = a.id();
  return a.tape().record(Op::relu, std::move(out), {a}, [ia](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, (t.value(ia).array() > Scalar(0)).select(g, Scalar(0)));
  });
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out = (Scalar(1) + (-a.value().array()).exp()).inverse().matrix();
  const std::size_t ia = a.id();
  auto& t0 = a.tape();
  const std::size_t io = t0.size();
  return t0.record(Op::sigmoid, std::move(out), {a}, [ia, io](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    const auto& y = t.value(io).array();
    t.accumulate(ia, (g.array() * y * (Scalar(1) - y)).matrix());
  });
}

template <typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out = a.value().array().tanh().matrix();
  const std::size_t ia = a.id();
  auto& t0 = a.tape();
  const std::size_t io = t0.size();
  return t0.record(Op::tanh, std::move(out), {a}, [ia, io](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    const auto& y = t.value(io).array();
    t.accumulate(ia, (g.array() * (Scalar(1) - y * y)).matrix());
  });
}

/// Natural log; every entry must be strictly positive.
template <typename Scalar>
BasicVar<Scalar> log(const BasicVar<Scalar>& a) {
  if ((a.value().array() <= Scalar(0)).any()) throw NumericError("log: non-positive argument");
  MatrixX<Scalar> out = a.value().array().log().matrix();
  const std::size_t ia = a.id();
  return a.tape().record(Op::log, std::move(out), {a}, [ia](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, (g.array() / t.value(ia).array()).matrix());
  });
}

/// Row-wise softmax with per-row max subtraction.
template <typename Scalar>
BasicVar<Scalar> softmax_rows(const BasicVar<Scalar>& a) {
  if (a.cols() < 1) throw DimensionError("softmax_rows: need at least one column");
  MatrixX<Scalar> out = (a.value().colwise() - a.value().rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  const std::size_t ia = a.id();
  auto& t0 = a.tape();
  const std::size_t io = t0.size();
  return t0.record(Op::softmax_rows, std::move(out), {a}, [ia, io](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    const MatrixX<Scalar>& y = t.value(io);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, (y.array() * (g.colwise() - dot).array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::span<const BasicVar<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  MatrixX<Scalar> out(rows, total);
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.cols();
  }
  return parts[0].tape().record(Op::concat_cols, std::move(out), parts,
                                [layout = std::move(layout)](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                                  for (const auto& [id, offset] : layout) {
                                    if (t.requires_grad(id)) t.accumulate(id, g.middleCols(offset, t.value(id).cols()));
                                  }
                                });
}

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::initializer_list<BasicVar<Scalar>> parts) {
  return concat_cols(std::span<const BasicVar<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicVar<Scalar> concat_rows(std::span<const BasicVar<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
  }
  MatrixX<Scalar> out(total, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.rows();
  }
  return parts[0].tape().record(Op::concat_rows, std::move(out), parts,
                                [layout = std::move(layout)](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                                  for (const auto& [id, offset] : layout) {
                                    if (t.requires_grad(id)) t.accumulate(id, g.middleRows(offset, t.value(id).rows()));
                                  }
                                });
}

template <typename Scalar>
BasicVar<Scalar> slice_cols(const BasicVar<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols: range out of bounds");
  MatrixX<Scalar> out = a.value().middleCols(start, count);
  const std::size_t ia = a.id();
  return a.tape().record(Op::slice_cols, std::move(out), {a},
                         [ia, start, count](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                           if (t.requires_grad(ia)) t.grad_buffer(ia).middleCols(start, count) += g;
                         });
}

template <typename Scalar>
BasicVar<Scalar> slice_rows(const BasicVar<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw DimensionError("slice_rows: range out of bounds");
  MatrixX<Scalar> out = a.value().middleRows(start, count);
  const std::size_t ia = a.id();
  return a.tape().record(Op::slice_rows, std::move(out), {a},
                         [ia, start, count](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                           if (t.requires_grad(ia)) t.grad_buffer(ia).middleRows(start, count) += g;
                         });
}

/// Stacks `times` copies of a 1 x n row.
template <typename Scalar>
BasicVar<Scalar> repeat_rows(const BasicVar<Scalar>& row, Eigen::Index times) {
  if (row.rows() != 1) throw DimensionError("repeat_rows: input must be a single row");
  MatrixX<Scalar> out = row.value().replicate(times, 1);
  const std::size_t ia = row.id();
  return row.tape().record(Op::repeat_rows, std::move(out), {row},
                           [ia](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) { t.accumulate(ia, g.colwise().sum()); });
}

/// out.row(i) = table.row(ids[i]). Rows whose id equals `skip_id` receive no gradient.
template <typename Scalar>
BasicVar<Scalar> gather_rows(const BasicVar<Scalar>& table, std::span<const int> ids, int skip_id = -1) {
  MatrixX<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw DimensionError("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  const std::size_t it = table.id();
  return table.tape().record(Op::gather_rows, std::move(out), {table},
                             [it, ids = std::vector<int>(ids.begin(), ids.end()), skip_id](
                                 BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                               if (!t.requires_grad(it)) return;
                               MatrixX<Scalar>& buf = t.grad_buffer(it);
                               for (std::size_t i = 0; i < ids.size(); ++i) {
                                 if (ids[i] == skip_id) continue;
                                 buf.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
                               }
                             });
}

/// Sliding windows (im2col). `x` stacks segments of `segment_rows` rows each;
/// every segment yields segment_rows - width + 1 rows holding `width`
/// consecutive input rows flattened row-major.
template <typename Scalar>
BasicVar<Scalar> windows(const BasicVar<Scalar>& x, Eigen::Index width, Eigen::Index segment_rows) {
  if (width < 1 || segment_rows < width) {
    throw DimensionError("windows: sequence length " + std::to_string(segment_rows) + " shorter than window " +
                         std::to_string(width));
  }
  if (x.rows() % segment_rows != 0) throw DimensionError("windows: rows not a multiple of the segment length");
  const Eigen::Index segments = x.rows() / segment_rows;
  const Eigen::Index per = segment_rows - width + 1;
  const Eigen::Index d = x.cols();
  MatrixX<Scalar> out(segments * per, width * d);
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (Eigen::Index i = 0; i < per; ++i) {
      for (Eigen::Index j = 0; j < width; ++j) {
        out.row(s * per + i).segment(j * d, d) = x.value().row(s * segment_rows + i + j);
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record(Op::windows, std::move(out), {x},
                         [ix, width, segment_rows, segments, per, d](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                           if (!t.requires_grad(ix)) return;
                           MatrixX<Scalar>& buf = t.grad_buffer(ix);
                           for (Eigen::Index s = 0; s < segments; ++s) {
                             for (Eigen::Index i = 0; i < per; ++i) {
                               for (Eigen::Index j = 0; j < width; ++j) {
                                 buf.row(s * segment_rows + i + j) += g.row(s * per + i).segment(j * d, d);
                               }
                             }
                           }
                         });
}

/// Column-wise maximum over each block of `segment_rows` rows. The gradient
/// goes entirely to the arg-max row; ties resolve to the lowest index.
template <typename Scalar>
BasicVar<Scalar> max_over_time(const BasicVar<Scalar>& e, Eigen::Index segment_rows) {
  if (e.rows() == 0 || e.cols() == 0) throw DimensionError("max_over_time: empty input");
  if (segment_rows < 1 || e.rows() % segment_rows != 0) throw DimensionError("max_over_time: bad segment length");
  const Eigen::Index segments = e.rows() / segment_rows;
  MatrixX<Scalar> out(segments, e.cols());
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(segments * e.cols()));
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (Eigen::Index c = 0; c < e.cols(); ++c) {
      Eigen::Index best = s * segment_rows;
      for (Eigen::Index r = best + 1; r < (s + 1) * segment_rows; ++r) {
        if (e.value()(r, c) > e.value()(best, c)) best = r;
      }
      out(s, c) = e.value()(best, c);
      argmax[static_cast<std::size_t>(s * e.cols() + c)] = best;
    }
  }
  const std::size_t ie = e.id();
  return e.tape().record(Op::max_over_time, std::move(out), {e},
                         [ie, argmax = std::move(argmax)](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
                           if (!t.requires_grad(ie)) return;
                           MatrixX<Scalar>& buf = t.grad_buffer(ie);
                           for (Eigen::Index s = 0; s < g.rows(); ++s) {
                             for (Eigen::Index c = 0; c < g.cols(); ++c) {
                               buf(argmax[static_cast<std::size_t>(s * g.cols() + c)], c) += g(s, c);
                             }
                           }
                         });
}

template <typename Scalar>
BasicVar<Scalar> max_over_time(const BasicVar<Scalar>& e) {
  return max_over_time(e, e.rows());
}

/// Valid 1-D convolution of an L x d sequence with one h x d kernel; the
/// result is an (L - h + 1) x 1 column of full window inner products.
template <typename Scalar>
BasicVar<Scalar> conv1d_valid(const BasicVar<Scalar>& x, const BasicVar<Scalar>& kernel) {
  if (kernel.cols() != x.cols()) throw DimensionError("conv1d_valid: kernel width differs from input width");
  auto w = windows(x, kernel.rows(), x.rows());
  return matmul(w, reshape(kernel, kernel.rows() * kernel.cols(), Eigen::Index(1)));
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape().record(Op::sum, std::move(out), {a}, [ia, r, c](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, MatrixX<Scalar>::Constant(r, c, g(0, 0)));
  });
}

template <typename Scalar>
BasicVar<Scalar> pick(const BasicVar<Scalar>& a, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) throw DimensionError("pick: index out of range");
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = a.value()(row, col);
  const std::size_t ia = a.id();
  return a.tape().record(Op::pick, std::move(out), {a}, [ia, row, col](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia)(row, col) += g(0, 0);
  });
}

template <typename Scalar>
BasicVar<Scalar> squared_norm(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  const std::size_t ia = a.id();
  return a.tape().record(Op::squared_norm, std::move(out), {a}, [ia](BasicTape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(ia, t.value(ia) * (Scalar(2) * g(0, 0)));
  });
}

/// Sum of 1x1 terms.
template <typename Scalar>
BasicVar<Scalar> add_all(std::span<const BasicVar<Scalar>> terms) {
  if (terms.empty()) throw DimensionError("add_all: no terms");
  BasicVar<Scalar> acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace srlf
