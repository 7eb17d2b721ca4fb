#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace srlf;

namespace {

double direct_literal(double r, double gamma, int k_total, int k) {
  double s = 0.0;
  double g = 1.0;
  for (int j = 0; j < k_total - k; ++j) {
    s += g;
    g *= gamma;
  }
  return r * s;
}

struct Bench {
  std::vector<Thread> threads = generate(fixtures::tiny_corpus());
  Model model = fixtures::tiny_model(threads);
};

void zero_policy(AgentParams& p) {
  for (auto* q : p.all()) q->value.setZero();
}

}  // namespace

TEST_SUITE("agent") {
  TEST_CASE("literal returns match direct summation") {
    Rng rng = make_rng(1, Stream::policy);
    for (int trial = 0; trial < 1000; ++trial) {
      const int k_total = 1 + static_cast<int>(uniform01(rng) * 20);
      double gamma = uniform01(rng);
      if (trial % 10 == 0) gamma = 1.0;
      std::vector<double> rewards(static_cast<std::size_t>(k_total));
      for (auto& r : rewards) r = uniform01(rng) - 0.25;
      const auto out = compute_returns(rewards, gamma, ReturnMode::literal);
      for (int k = 0; k < k_total; ++k) {
        CHECK(std::abs(out[static_cast<std::size_t>(k)] - direct_literal(rewards[static_cast<std::size_t>(k)], gamma, k_total, k)) <
              1e-12);
      }
      CHECK(std::abs(out.back() - rewards.back()) < 1e-12);
    }
  }

  TEST_CASE("return examples") {
    std::vector<double> r(10, 0.0);
    r[8] = 0.5;
    CHECK(compute_returns(r, 0.9, ReturnMode::literal)[8] == doctest::Approx(0.95).epsilon(1e-15));
    const std::vector<double> rs{0.1, -0.2, 0.3};
    CHECK(compute_returns(rs, 0.0, ReturnMode::return_to_go) == rs);
    const auto rtg = compute_returns(rs, 0.5, ReturnMode::return_to_go);
    CHECK(rtg[0] == doctest::Approx(0.1 - 0.1 + 0.075).epsilon(1e-15));
    CHECK(rtg[2] == 0.3);
    CHECK_THROWS(compute_returns(rs, 1.5, ReturnMode::literal));
  }

  TEST_CASE("zero policy parameters give exactly one half everywhere") {
    Bench b;
    zero_policy(b.model.agent);
    const auto e = encode(b.threads[0], b.model.vocab, b.model.dims);
    const auto base = frozen_base(b.model.env, e, b.model.dims.max_len);
    Tape tape;
    auto obs = observation(base, b.model.env.stance_table.value, e, AgentView::proposal, std::vector<int>(3, 0));
    auto p = policy_probs(tape.constant(base.tweet), tape.constant(obs), b.model.agent, false);
    CHECK((p.value().array() == 0.5).all());
    // Greedy ties resolve to remove.
    CHECK(sample_actions(p.value(), e.mask, nullptr) == std::vector<int>(3, kRemove));
  }

  TEST_CASE("policy rows are distributions for random parameters") {
    Bench b;
    for (const auto& t : b.threads) {
      const auto e = encode(t, b.model.vocab, b.model.dims);
      const auto base = frozen_base(b.model.env, e, b.model.dims.max_len);
      Tape tape;
      auto obs = observation(base, b.model.env.stance_table.value, e, AgentView::state, std::vector<int>(3, 0));
      auto p = policy_probs(tape.constant(base.tweet), tape.constant(obs), b.model.agent, false).value();
      for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
      CHECK((p.array() > 0.0).all());
    }
  }

  TEST_CASE("comment order matters to the policy") {
    Bench b;
    Rng rng = make_rng(2, Stream::init);
    const Matrix tweet = uniform_matrix(1, 6, 1.0, rng);
    Matrix obs = uniform_matrix(2, 6, 1.0, rng);
    Matrix swapped = obs;
    swapped.row(0) = obs.row(1);
    swapped.row(1) = obs.row(0);
    Tape tape;
    const Matrix p = policy_probs(tape.constant(tweet), tape.constant(obs), b.model.agent, false).value();
    const Matrix q = policy_probs(tape.constant(tweet), tape.constant(swapped), b.model.agent, false).value();
    CHECK((p.row(0) - q.row(1)).cwiseAbs().maxCoeff() > 1e-6);
  }

  TEST_CASE("sampling follows the distribution and respects the mask") {
    Matrix certain(2, 2);
    certain << 1, 0, 0.5, 0.5;
    Rng rng = make_rng(3, Stream::policy);
    const std::vector<int> mask{1, 0, 1};
    long retained = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto a = sample_actions(certain, mask, &rng);
      CHECK(a[0] == kRemove);
      CHECK(a[1] == kRemove);
      retained += a[2];
    }
    CHECK(std::abs(retained / 10000.0 - 0.5) < 0.02);
    CHECK_THROWS_AS(sample_actions(Matrix::Constant(3, 2, 0.5), mask, &rng), DimensionError);
  }

  TEST_CASE("zero returns leave the policy untouched") {
    Bench b;
    const auto e = encode(b.threads[0], b.model.vocab, b.model.dims);
    const auto base = frozen_base(b.model.env, e, b.model.dims.max_len);
    EpisodeStep step;
    step.observation = observation(base, b.model.env.stance_table.value, e, AgentView::proposal, e.mask);
    step.actions = e.mask;
    step.discounted_return = 0.0;
    AgentParams before = b.model.agent;
    AdamState adam;
    CHECK_FALSE(policy_update(base.tweet, step, e.mask, b.model.agent, adam));
    auto after = b.model.agent.all();
    auto original = before.all();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value == original[i]->value);
  }

  TEST_CASE("a positive return makes the taken action steadily more likely") {
    Bench b;
    const auto e = encode(fixtures::hand_thread(1), b.model.vocab, b.model.dims);
    const auto base = frozen_base(b.model.env, e, b.model.dims.max_len);
    EpisodeStep step;
    step.observation = observation(base, b.model.env.stance_table.value, e, AgentView::proposal, e.mask);
    step.actions = {kRetain, kRemove, kRemove};
    step.discounted_return = 0.5;
    AdamState adam;
    auto retain_probability = [&] {
      Tape tape;
      return policy_probs(tape.constant(base.tweet), tape.constant(step.observation), b.model.agent, false)
          .value()(0, kRetain);
    };
    double previous = retain_probability();
    for (int i = 0; i < 8; ++i) {
      REQUIRE(policy_update(base.tweet, step, e.mask, b.model.agent, adam));
      const double now = retain_probability();
      CHECK(now > previous);
      previous = now;
    }
  }

  TEST_CASE("masked rows do not enter the surrogate") {
    Bench b;
    auto thread = fixtures::hand_thread(2);
    const auto e = encode(thread, b.model.vocab, b.model.dims);
    const auto base = frozen_base(b.model.env, e, b.model.dims.max_len);
    EpisodeStep step;
    step.observation = observation(base, b.model.env.stance_table.value, e, AgentView::proposal, e.mask);
    CHECK(step.observation.rows() == 2);
    step.actions = {kRetain, kRemove, kRemove};
    step.discounted_return = 0.3;
    FrozenBase other = base;
    other.comments.row(2).setConstant(7.0);
    const Matrix obs2 = observation(other, b.model.env.stance_table.value, e, AgentView::proposal, e.mask);
    CHECK(obs2 == step.observation);
  }

  TEST_CASE("episodes: K = 1, empty threads and reward replay") {
    Bench b;
    AgentConfig cfg;
    cfg.episodes = 1;
    const auto e = encode(b.threads[1], b.model.vocab, b.model.dims);
    Rng rng = make_rng(5, Stream::policy);
    AdamState adam;
    auto trace = run_episodes(b.model.env, b.model.agent, e, b.model.dims.max_len, cfg, rng, adam);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].discounted_return == trace.steps[0].reward);

    Thread empty = fixtures::hand_thread(0);
    const auto ee = encode(empty, b.model.vocab, b.model.dims);
    Model before = b.model;
    cfg.episodes = 4;
    auto t0 = run_episodes(b.model.env, b.model.agent, ee, b.model.dims.max_len, cfg, rng, adam);
    CHECK(t0.steps.size() == 4);
    auto now = b.model.agent.all();
    auto was = before.agent.all();
    for (std::size_t i = 0; i < now.size(); ++i) CHECK(now[i]->value == was[i]->value);

    // Rewards recorded during the episodes equal an offline recomputation.
    Model copy = b.model;
    cfg.episodes = 3;
    auto trace3 = run_episodes(b.model.env, b.model.agent, e, b.model.dims.max_len, cfg, rng, adam);
    for (const auto& s : trace3.steps) {
      Tape tape;
      auto vars = bind_env(tape, copy.env, false);
      auto base = encode_thread(vars, e, copy.dims.max_len);
      CHECK(reward(env_forward(vars, base, e, s.actions).value(), e.label) == s.reward);
      for (std::size_t i = 0; i < s.log_probs.size(); ++i) CHECK(s.log_probs[i] <= 0.0);
    }
  }

  TEST_CASE("episodes are reproducible from the seed and leave theta_1 alone") {
    Bench b;
    Model first = b.model;
    Model second = b.model;
    AgentConfig cfg;
    cfg.episodes = 3;
    const auto e = encode(b.threads[2], b.model.vocab, b.model.dims);
    Rng r1 = make_rng(8, Stream::policy);
    Rng r2 = make_rng(8, Stream::policy);
    AdamState a1, a2;
    auto t1 = run_episodes(first.env, first.agent, e, first.dims.max_len, cfg, r1, a1);
    auto t2 = run_episodes(second.env, second.agent, e, second.dims.max_len, cfg, r2, a2);
    for (std::size_t k = 0; k < t1.steps.size(); ++k) {
      CHECK(t1.steps[k].actions == t2.steps[k].actions);
      CHECK(t1.steps[k].reward == t2.steps[k].reward);
    }
    auto env_now = first.env.all();
    auto env_was = b.model.env.all();
    for (std::size_t i = 0; i < env_now.size(); ++i) CHECK(env_now[i]->value == env_was[i]->value);
  }

  TEST_CASE("policy surrogate gradients match central differences") {
    Bench b;
    std::vector<Thread> few(b.threads.begin(), b.threads.begin() + 3);
    auto report = model_gradcheck(b.model, fixtures::tiny_training(), few).theta2;
    INFO("max rel error " << report.max_rel_error());
    CHECK(report.passed());
  }
}
