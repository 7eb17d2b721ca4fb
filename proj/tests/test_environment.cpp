#include "fixtures.hpp"

#include "srlf/gradcheck.hpp"

#include <doctest.h>

#include <cmath>

using namespace srlf;

namespace {

struct Bench {
  std::vector<Thread> threads = generate(fixtures::tiny_corpus());
  Model model = fixtures::tiny_model(threads);
};

}  // namespace

TEST_SUITE("environment") {
  TEST_CASE("apply_actions with all-zero actions is the identity") {
    Bench b;
    for (const auto& t : b.threads) {
      const auto e = encode(t, b.model.vocab, b.model.dims);
      Tape tape;
      auto vars = bind_env(tape, b.model.env, false);
      auto base = encode_thread(vars, e, b.model.dims.max_len);
      const std::vector<int> zeros(e.mask.size(), 0);
      auto out = apply_actions(base.comments, vars.stance_table, e.stances, zeros, e.mask);
      CHECK(out.value() == base.comments.value());
    }
  }

  TEST_CASE("apply_actions adds the stance row for retained comments only") {
    Tape tape;
    auto comments = tape.constant(Matrix::Zero(3, 2));
    Matrix table(4, 2);
    table << 1, 1, 2, 2, 3, 3, 4, 4;
    auto s = tape.constant(table);
    const std::vector<int> stances{2, 0, 0}, actions{1, 0, 0}, mask{1, 1, 0};
    auto out = apply_actions(comments, s, stances, actions, mask);
    Matrix expected = Matrix::Zero(3, 2);
    expected.row(0) << 3, 3;
    CHECK(out.value() == expected);
    const std::vector<int> bad{0, 0, 1};
    CHECK_THROWS(apply_actions(comments, s, stances, bad, mask));
    const std::vector<int> two{2, 0, 0};
    CHECK_THROWS(apply_actions(comments, s, stances, two, mask));
  }

  TEST_CASE("class probabilities are normalized") {
    Bench b;
    Rng rng = make_rng(4, Stream::policy);
    for (const auto& t : b.threads) {
      const auto e = encode(t, b.model.vocab, b.model.dims);
      const auto p = predict(b.model, e, AgentView::proposal, ActionRule::policy_sampled, &rng);
      CHECK(std::abs(p.probs.sum() - 1.0) < 1e-9);
      CHECK((p.probs.array() > 0.0).all());
    }
  }

  TEST_CASE("masked comment slots have no influence on the output") {
    Bench b;
    const auto thread = fixtures::hand_thread(2);
    const auto e = encode(thread, b.model.vocab, b.model.dims);
    REQUIRE(e.mask == std::vector<int>{1, 1, 0});
    Tape tape;
    auto vars = bind_env(tape, b.model.env, false);
    auto base = encode_thread(vars, e, b.model.dims.max_len);
    const std::vector<int> actions{1, 0, 0};
    const Matrix reference = env_forward(vars, base, e, actions).value();

    Rng rng = make_rng(9, Stream::init);
    BaseRepresentation noisy = base;
    Matrix perturbed = base.comments.value();
    perturbed.row(2) = uniform_matrix(1, perturbed.cols(), 5.0, rng);
    noisy.comments = tape.constant(perturbed);
    EncodedThread other = e;
    other.stances[2] = 3;
    CHECK(env_forward(vars, noisy, other, actions).value() == reference);
  }

  TEST_CASE("missing comments are zero rows and the PAD row gets no gradient") {
    Bench b;
    const auto e = encode(fixtures::hand_thread(1), b.model.vocab, b.model.dims);
    Tape tape;
    auto vars = bind_env(tape, b.model.env, true);
    auto base = encode_thread(vars, e, b.model.dims.max_len);
    CHECK(base.comments.value().bottomRows(2).isZero());
    for (auto* p : b.model.env.all()) p->zero_grad();
    std::vector<Var> probs{env_forward(vars, base, e, std::vector<int>{1, 0, 0})};
    tape.backward(env_loss(probs, std::vector<int>{e.label}, vars.all(), 1e-3));
    CHECK(b.model.env.embedding.grad.row(text::kPad).isZero());
    CHECK_FALSE(b.model.env.embedding.grad.isZero());
  }

  TEST_CASE("all-zero attention weights give a zero fused vector") {
    Bench b;
    b.model.env.att_w2.value.setZero();
    b.model.env.att_b2.value.setConstant(-1.0);
    const auto e = encode(fixtures::hand_thread(3), b.model.vocab, b.model.dims);
    Tape tape;
    auto vars = bind_env(tape, b.model.env, false);
    auto base = encode_thread(vars, e, b.model.dims.max_len);
    auto att = attend(base.tweet, base.comments, e.mask, vars);
    CHECK(att.weights.value().isZero());
    CHECK(att.fused.value().isZero());
  }

  TEST_CASE("env_loss hand value") {
    Tape tape;
    Matrix p1(1, 4), p2(1, 4);
    p1 << 0.5, 0.25, 0.125, 0.125;
    p2 << 0.25, 0.25, 0.25, 0.25;
    std::vector<Var> probs{tape.constant(p1), tape.constant(p2)};
    Matrix w(1, 2);
    w << 3, 4;
    std::vector<Var> reg{tape.constant(w)};
    auto loss = env_loss(probs, std::vector<int>{0, 3}, reg, 0.1);
    CHECK(loss.scalar() == doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0 + 0.05 * 25.0).epsilon(1e-15));
  }

  TEST_CASE("reward is zero for the uniform distribution and monotone in p_true") {
    Matrix uniform = Matrix::Constant(1, 4, 0.25);
    CHECK(reward(uniform, 2) == 0.0);
    double previous = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double pt = i / 100.0;
      Matrix p(1, 4);
      p << pt, (1 - pt) / 3, (1 - pt) / 3, (1 - pt) / 3;
      const double r = reward(p, 0);
      CHECK(r > previous);
      CHECK(r >= -0.25);
      CHECK(r <= 0.75);
      previous = r;
    }
  }

  TEST_CASE("env_loss gradients match central differences") {
    Bench b;
    std::vector<Thread> few(b.threads.begin(), b.threads.begin() + 2);
    auto report = model_gradcheck(b.model, fixtures::tiny_training(), few).theta1;
    INFO("max rel error " << report.max_rel_error());
    CHECK(report.passed());
    CHECK(report.groups.size() == b.model.env.all().size());
  }
}
