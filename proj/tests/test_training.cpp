#include "fixtures.hpp"
#include "srlf/training.hpp"

#include <doctest.h>

using namespace srlf;

namespace {

std::vector<Matrix> values(std::vector<Parameter*> params) {
  std::vector<Matrix> out;
  for (auto* p : params) out.push_back(p->value);
  return out;
}

struct Setup {
  std::vector<Thread> threads;
  DataSplit split;
  TrainConfig config;
  Model initial;
};

Setup setup(Ablation ablation, int epochs = 2, double noise = 0.4) {
  auto corpus = fixtures::tiny_corpus(48);
  corpus.noise = noise;
  Setup s;
  s.threads = generate(corpus);
  s.split = split_threads(s.threads, 1);
  s.config = fixtures::tiny_training();
  s.config.ablation = ablation;
  s.config.epochs = epochs;
  s.initial = initial_model(s.config, s.split.train);
  return s;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("no_dl leaves theta_1 bit-identical") {
    auto s = setup(Ablation::no_dl);
    auto before = values(s.initial.env.all());
    auto agent_before = values(s.initial.agent.all());
    auto result = train(s.config, s.initial, s.split.train, s.split.val);
    CHECK(values(result.model.env.all()) == before);
    CHECK(values(result.model.agent.all()) != agent_before);
  }

  TEST_CASE("no_pl leaves theta_2 bit-identical and retains every real comment") {
    auto s = setup(Ablation::no_pl);
    auto before = values(s.initial.agent.all());
    auto result = train(s.config, s.initial, s.split.train, s.split.val);
    CHECK(values(result.model.agent.all()) == before);
    CHECK(result.stats.rewards_seen == 0);
    for (const auto& t : s.split.test) {
      const auto encoded = encode(t, result.model.vocab, result.model.dims);
      const auto p = predict(result.model, encoded, s.config.agent.view, eval_rule(s.config));
      for (std::size_t i = 0; i < encoded.mask.size(); ++i) CHECK(p.actions[i] == encoded.mask[i]);
    }
  }

  TEST_CASE("training is deterministic in the seed") {
    auto s = setup(Ablation::full);
    auto a = train(s.config, s.initial, s.split.train, s.split.val);
    auto b = train(s.config, s.initial, s.split.train, s.split.val);
    CHECK(values(a.model.all()) == values(b.model.all()));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.stats.min_reward == b.stats.min_reward);
  }

  TEST_CASE("zero epochs return the initial model") {
    auto s = setup(Ablation::full, 0);
    auto result = train(s.config, s.initial, s.split.train, s.split.val);
    CHECK(result.history.empty());
    CHECK(result.best_epoch == -1);
    CHECK(values(result.model.all()) == values(s.initial.all()));
  }

  TEST_CASE("mini-batches alternate between detector and agent") {
    auto s = setup(Ablation::full, 3);
    auto result = train(s.config, s.initial, s.split.train, s.split.val);
    const long batches = static_cast<long>((s.split.train.size() + s.config.batch_size - 1) / s.config.batch_size);
    CHECK(result.stats.env_steps == 3 * ((batches + 1) / 2));
    CHECK(result.stats.agent_batches == 3 * (batches / 2));
    CHECK(result.history.size() == 6);
    CHECK(result.stats.min_reward > -0.25);
    CHECK(result.stats.max_reward <= 0.75);
  }

  TEST_CASE("training lowers the detector loss") {
    auto corpus = fixtures::tiny_corpus(120);
    corpus.signal = 1.0;
    corpus.source_signal = 1.0;
    const auto threads = generate(corpus);
    const auto split = split_threads(threads, 1);
    auto config = fixtures::tiny_training();
    config.epochs = 6;
    config.learning_rate = 1e-2;
    auto result = train(config, initial_model(config, split.train), split.train, split.val);
    CHECK(result.history[10].loss < result.history[0].loss);
  }

  TEST_CASE("best model tracks the highest validation accuracy") {
    auto s = setup(Ablation::full, 3);
    auto result = train(s.config, s.initial, s.split.train, s.split.val);
    double best = 0.0;
    for (const auto& r : result.history) {
      if (r.split == "val") best = std::max(best, r.metrics.accuracy);
    }
    CHECK(result.best_val_accuracy == best);
    CHECK(evaluate(result.model, s.config, s.split.val).accuracy == best);
  }

  TEST_CASE("audit on a clean corpus has no corrupted rate") {
    auto s = setup(Ablation::full, 0, 0.0);
    auto report = agent_audit(s.initial, s.config, s.threads, false);
    CHECK(report.clean_total > 0);
    CHECK_FALSE(report.corrupted_rate().has_value());
    CHECK_FALSE(report.gap().has_value());
  }

  TEST_CASE("sampled audit of an uninformative policy retains about half") {
    auto corpus = fixtures::tiny_corpus(400);
    const auto threads = generate(corpus);
    auto config = fixtures::tiny_training();
    auto model = initial_model(config, threads);
    for (auto* p : model.agent.all()) p->value.setZero();
    auto report = agent_audit(model, config, threads, true, 5);
    const double rate = static_cast<double>(report.clean_retained + report.corrupted_retained) /
                        static_cast<double>(report.clean_total + report.corrupted_total);
    CHECK(rate == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("audit rejects threads without corruption flags") {
    auto s = setup(Ablation::full, 0);
    auto threads = s.threads;
    threads.front().comments.front().corrupted.reset();
    CHECK_THROWS_AS(agent_audit(s.initial, s.config, threads, false), ValidationError);
  }

  TEST_CASE("sweep emits one row per value") {
    auto s = setup(Ablation::full, 1);
    const std::vector<double> gammas{0.1, 0.9};
    auto rows = sweep(s.config, SweepParameter::gamma, gammas, s.split, true);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].value == 0.1);
    CHECK(rows[1].value == 0.9);
    auto serial = sweep(s.config, SweepParameter::gamma, gammas, s.split, false);
    CHECK(serial[1].test.accuracy == rows[1].test.accuracy);
  }

  TEST_CASE("invalid configs are rejected before training") {
    auto s = setup(Ablation::full);
    s.config.agent.gamma = 1.5;
    s.config.batch_size = 0;
    CHECK(s.config.validate().size() == 2);
    CHECK_THROWS_AS(train(s.config, s.initial, s.split.train, s.split.val), ValidationError);
  }
}
