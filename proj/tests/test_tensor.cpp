#include "srlf/gradcheck.hpp"
#include "srlf/optim.hpp"
#include "srlf/rng.hpp"
#include "srlf/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace srlf;

namespace {

Matrix mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> values) {
  Matrix m(rows, cols);
  auto it = values.begin();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = *it++;
  }
  return m;
}

// Random values kept away from ReLU and max switching points.
Matrix away_from_zero(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m = uniform_matrix(rows, cols, 1.0, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    v = (v < 0 ? -0.2 : 0.2) + v;
  }
  return m;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("matmul forward and dimension check") {
    Tape tape;
    auto a = tape.constant(mat(2, 3, {1, 2, 3, 4, 5, 6}));
    auto b = tape.constant(mat(3, 2, {7, 8, 9, 10, 11, 12}));
    auto c = matmul(a, b);
    CHECK(c.value() == mat(2, 2, {58, 64, 139, 154}));
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
  }

  TEST_CASE("relu gradient of sum is the step function with zero at zero") {
    Parameter x("x", mat(1, 3, {-1, 2, 0}));
    Tape tape;
    tape.backward(sum(relu(tape.parameter(x))));
    CHECK(x.grad == mat(1, 3, {0, 1, 0}));
  }

  TEST_CASE("softmax rows are distributions even for huge logits") {
    Rng rng = make_rng(3, Stream::init);
    Tape tape;
    Matrix logits = uniform_matrix(5, 7, 50.0, rng);
    logits(0, 0) = 800.0;
    auto p = softmax_rows(tape.constant(logits));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      CHECK(std::abs(p.value().row(r).sum() - 1.0) < 1e-9);
      CHECK((p.value().row(r).array() >= 0.0).all());
    }
    CHECK(p.value()(0, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("max_over_time picks the first maximum and routes gradient there only") {
    Parameter e("e", mat(4, 1, {1, 3, 3, 2}));
    Tape tape;
    auto m = max_over_time(tape.parameter(e));
    CHECK(m.scalar() == 3.0);
    tape.backward(sum(m));
    CHECK(e.grad == mat(4, 1, {0, 1, 0, 0}));
  }

  TEST_CASE("conv1d_valid matches a direct loop") {
    Rng rng = make_rng(5, Stream::init);
    const Matrix x = uniform_matrix(7, 3, 1.0, rng);
    const Matrix k = uniform_matrix(3, 3, 1.0, rng);
    Tape tape;
    auto e = conv1d_valid(tape.constant(x), tape.constant(k));
    REQUIRE(e.rows() == 5);
    for (Eigen::Index j = 0; j < 5; ++j) {
      double direct = 0.0;
      for (Eigen::Index a = 0; a < 3; ++a) {
        for (Eigen::Index c = 0; c < 3; ++c) direct += x(j + a, c) * k(a, c);
      }
      CHECK(e.value()(j, 0) == doctest::Approx(direct).epsilon(1e-14));
    }
  }

  TEST_CASE("conv1d_valid on a one-hot text selects kernel entries") {
    Tape tape;
    Matrix x = Matrix::Zero(3, 2);
    x(1, 0) = 1.0;
    auto e = conv1d_valid(tape.constant(x), tape.constant(mat(2, 2, {1, 2, 3, 4})));
    CHECK(e.value() == mat(2, 1, {3, 1}));
  }

  TEST_CASE("gather_rows skips the padding id when accumulating") {
    Parameter table("table", mat(3, 2, {0, 0, 1, 2, 3, 4}), true);
    Tape tape;
    const std::vector<int> ids{0, 2, 2, 1};
    auto g = gather_rows(tape.parameter(table), ids, 0);
    CHECK(g.value() == mat(4, 2, {0, 0, 3, 4, 3, 4, 1, 2}));
    tape.backward(sum(g));
    CHECK(table.grad == mat(3, 2, {0, 0, 1, 1, 2, 2}));
  }

  TEST_CASE("backward requires a scalar root and rejects non-finite values") {
    Tape tape;
    auto a = tape.constant(mat(1, 2, {1, 2}));
    CHECK_THROWS_AS(tape.backward(a), DimensionError);
    CHECK_THROWS_AS(log(tape.constant(mat(1, 1, {0.0}))), NumericError);
  }

  TEST_CASE("central differences agree with every op rule") {
    Rng rng = make_rng(11, Stream::init);
    Parameter a("a", away_from_zero(4, 3, rng));
    Parameter b("b", away_from_zero(3, 5, rng));
    Parameter row("row", away_from_zero(1, 5, rng));
    Parameter col("col", away_from_zero(4, 1, rng));
    Parameter table("table", away_from_zero(6, 3, rng), true);
    const std::vector<int> ids{1, 4, 0, 5, 2, 3, 1, 4};

    auto loss = [&](Tape& t) {
      auto va = t.parameter(a);
      auto vb = t.parameter(b);
      auto prod = add_row(matmul(va, vb), t.parameter(row));
      auto gated = mul_col(sigmoid(prod), t.parameter(col));
      auto mixed = add(tanh(prod), sub(gated, scale(prod, 0.3)));
      const std::vector<Var> rows{mixed, repeat_rows(slice_rows(mixed, 1, 1), 2)};
      auto stacked = concat_rows(std::span<const Var>(rows));
      const std::vector<Var> cols{stacked, transpose(reshape(slice_cols(stacked, 0, 3), 3, 6))};
      auto wide = concat_cols(std::span<const Var>(cols));
      auto probs = softmax_rows(wide);
      auto ll = log(probs);
      auto emb = gather_rows(t.parameter(table), ids, 0);
      auto win = windows(emb, 2, 4);
      auto pooled = max_over_time(relu(matmul(win, t.constant(Matrix::Ones(6, 1)))), 3);
      auto terms = std::vector<Var>{pick(ll, 2, 3), sum(mul(ll, ll)), scale(squared_norm(pooled), 0.5),
                                    sum(relu(mixed))};
      return add_all(std::span<const Var>(terms));
    };
    auto report = gradcheck(loss, {&a, &b, &row, &col, &table});
    INFO("max rel error " << report.max_rel_error());
    CHECK(report.passed());
    for (const auto& g : report.groups) CHECK(g.entries > 0);
  }

  TEST_CASE("fault injection is detected and named") {
    Rng rng = make_rng(12, Stream::init);
    Parameter a("weights", away_from_zero(3, 3, rng));
    auto loss = [&](Tape& t) { return sum(tanh(matmul(t.parameter(a), t.parameter(a)))); };
    CHECK(gradcheck(loss, {&a}).passed());
    auto report = gradcheck(loss, {&a}, 1e-5, 1e-4, Op::tanh);
    CHECK_FALSE(report.passed());
    CHECK(report.groups.front().name == "weights");
  }

  TEST_CASE("gradcheck sets aside entries sitting on a ReLU switching point") {
    Parameter b("bias", mat(1, 1, {0.0}));
    auto loss = [&](Tape& t) { return sum(relu(t.parameter(b))); };
    auto report = gradcheck(loss, {&b});
    CHECK(report.groups.front().kinks == 1);
    CHECK(report.groups.front().entries == 0);
  }

  TEST_CASE("op names round trip") {
    for (auto op : {Op::matmul, Op::relu, Op::softmax_rows, Op::max_over_time, Op::gather_rows}) {
      CHECK(op_from_name(op_name(op)) == op);
    }
    CHECK_FALSE(op_from_name("nope").has_value());
  }
}

TEST_SUITE("optim") {
  TEST_CASE("first Adam step moves each entry by the learning rate against the gradient sign") {
    Parameter p("p", mat(1, 3, {1, 1, 1}));
    p.grad = mat(1, 3, {0.5, -2.0, 1e-3});
    AdamState state;
    adam_step({&p}, state, Direction::descent);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    for (int i = 0; i < 3; ++i) {
      const double g = p.grad(0, i);
      CHECK(p.value(0, i) == doctest::Approx(1.0 - 1e-3 * g / (std::abs(g) + 1e-8)).epsilon(1e-15));
    }
  }

  TEST_CASE("two Adam steps match a hand-rolled reference") {
    Parameter p("p", mat(1, 1, {0.0}));
    AdamState state;
    state.learning_rate = 0.1;
    double m = 0, v = 0, x = 0;
    for (int t = 1; t <= 2; ++t) {
      const double g = t == 1 ? 1.0 : -3.0;
      p.grad(0, 0) = g;
      adam_step({&p}, state, Direction::ascent);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      x += 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(p.value(0, 0) == doctest::Approx(x).epsilon(1e-14));
    }
  }

  TEST_CASE("the padding row never moves") {
    Parameter p("emb", mat(2, 2, {0, 0, 1, 1}), true);
    p.grad = mat(2, 2, {5, 5, 1, 1});
    AdamState state;
    adam_step({&p}, state, Direction::descent);
    CHECK(p.value.row(0).isZero());
    CHECK(p.value(1, 0) < 1.0);
  }
}
