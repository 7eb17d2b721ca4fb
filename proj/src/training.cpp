#include "srlf/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

namespace srlf {

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&errors](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  require(dims.word_dim > 0, "d_w must be positive");
  require(dims.hidden_dim > 0, "d must be positive");
  require(dims.max_len > 0, "max_len must be positive");
  require(dims.max_comments > 0, "max_comments must be positive");
  require(dims.lstm_hidden > 0, "lstm_hidden must be positive");
  require(dims.classes == kClassCount, "classes must be 4");
  require(!dims.kernel_sizes.empty(), "kernel_sizes must not be empty");
  for (int h : dims.kernel_sizes) {
    require(h > 0, "kernel sizes must be positive");
    require(static_cast<std::size_t>(h) <= dims.max_len, "kernel size " + std::to_string(h) + " exceeds max_len");
  }
  if (!dims.kernel_sizes.empty()) {
    require(dims.hidden_dim % static_cast<Eigen::Index>(dims.kernel_sizes.size()) == 0,
            "d must be divisible by the number of kernel sizes");
  }
  require(agent.episodes >= 1, "episodes must be >= 1");
  require(agent.gamma >= 0.0 && agent.gamma <= 1.0, "gamma must lie in [0, 1]");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(learning_rate > 0.0, "lr must be positive");
  require(lr_decay > 0.0, "lr_decay must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(epochs >= 0, "epochs must be >= 0");
  require(min_count >= 1, "min_count must be >= 1");
  return errors;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.dims.word_dim = 300;
  c.dims.hidden_dim = 300;
  c.dims.max_len = 50;
  c.dims.lstm_hidden = 150;
  return c;
}

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.dims.word_dim = 6;
  c.dims.hidden_dim = 6;
  c.dims.max_len = 8;
  c.dims.max_comments = 3;
  c.dims.lstm_hidden = 3;
  c.agent.episodes = 2;
  c.batch_size = 4;
  c.epochs = 1;
  return c;
}

ActionRule eval_rule(const TrainConfig& config) {
  if (config.ablation == Ablation::no_pl && config.no_pl_actions == NoPolicyActions::retain_all) {
    return ActionRule::retain_all;
  }
  return ActionRule::policy_greedy;
}

Model initial_model(const TrainConfig& config, std::span<const Thread> train_set,
                    const std::optional<std::filesystem::path>& embeddings) {
  std::vector<std::string> texts;
  for (const auto& t : train_set) {
    texts.push_back(t.source);
    for (const auto& c : t.comments) texts.push_back(c.text);
  }
  auto vocab = text::Vocab::build(texts, config.min_count);
  std::optional<Matrix> table;
  if (embeddings) {
    Rng rng = make_rng(config.seed, Stream::embeddings);
    table = text::load_pretrained(*embeddings, vocab, rng);
  }
  return Model::init(config.dims, std::move(vocab), config.seed, std::move(table));
}

Metrics evaluate(Model& model, const TrainConfig& config, std::span<const Thread> threads) {
  Confusion confusion(config.dims.classes);
  const ActionRule rule = eval_rule(config);
  for (const auto& t : threads) {
    const auto encoded = encode(t, model.vocab, model.dims);
    confusion.add(encoded.label, predict(model, encoded, config.agent.view, rule).predicted);
  }
  return metrics_from(confusion);
}

double evaluation_loss(Model& model, const TrainConfig& config, std::span<const Thread> threads) {
  if (threads.empty()) return 0.0;
  const ActionRule rule = eval_rule(config);
  double ce = 0.0;
  for (const auto& t : threads) {
    const auto encoded = encode(t, model.vocab, model.dims);
    ce -= std::log(predict(model, encoded, config.agent.view, rule).probs(0, encoded.label));
  }
  double penalty = 0.0;
  for (auto* p : model.env.all()) penalty += p->value.squaredNorm();
  return ce / static_cast<double>(threads.size()) + 0.5 * config.lambda * penalty;
}

namespace {

double environment_step(Model& model, const TrainConfig& config, std::span<const EncodedThread* const> batch,
                         AdamState& optimizer) {
  const bool update = config.ablation != Ablation::no_dl;
  const ActionRule rule =
      config.ablation == Ablation::no_pl ? eval_rule(config) : ActionRule::policy_greedy;
  auto params = model.env.all();
  Tape tape;
  auto vars = bind_env(tape, model.env, update);
  std::vector<Var> probs;
  std::vector<int> labels;
  for (const EncodedThread* thread : batch) {
    auto base = encode_thread(vars, *thread, model.dims.max_len);
    const FrozenBase frozen{base.tweet.value(), base.comments.value()};
    auto actions = choose_actions(model, frozen, *thread, config.agent.view, rule);
    probs.push_back(env_forward(vars, base, *thread, actions));
    labels.push_back(thread->label);
  }
  auto loss = env_loss(probs, labels, vars.all(), config.lambda);
  if (update) {
    for (auto* p : params) p->zero_grad();
    tape.backward(loss);
    adam_step(params, optimizer, Direction::descent);
  }
  return loss.scalar();
}

}  // namespace

TrainResult train(const TrainConfig& config, Model initial, std::span<const Thread> train_set,
                  std::span<const Thread> val_set, const EpochCallback& on_epoch) {
  if (auto errors = config.validate(); !errors.empty()) {
    std::ostringstream msg;
    msg << "invalid training config:";
    for (const auto& e : errors) msg << "\n  " << e;
    throw ValidationError(msg.str());
  }
  if (train_set.empty()) throw ValidationError("training set is empty");

  TrainResult result;
  result.model = initial;
  Model& model = initial;
  const auto encoded = encode_all(train_set, model.vocab, model.dims);

  AdamState env_optimizer;
  env_optimizer.learning_rate = config.learning_rate;
  AdamState agent_optimizer;
  agent_optimizer.learning_rate = config.learning_rate;
  Rng shuffle_rng = make_rng(config.seed, Stream::shuffle);
  Rng policy_rng = make_rng(config.seed, Stream::policy);

  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  bool first_reward = true;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    long loss_count = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const EncodedThread*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&encoded[order[i]]);

      if (batch_index % 2 == 0) {
        const double loss = environment_step(model, config, batch, env_optimizer);
        if (!std::isfinite(loss)) {
          throw NumericError("environment loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
        }
        loss_sum += loss;
        ++loss_count;
        ++result.stats.env_steps;
      } else {
        ++result.stats.agent_batches;
        if (config.ablation == Ablation::no_pl) continue;
        for (const EncodedThread* thread : batch) {
          auto trace = run_episodes(model.env, model.agent, *thread, model.dims.max_len, config.agent, policy_rng,
                                    agent_optimizer);
          for (const auto& step : trace.steps) {
            if (first_reward) {
              result.stats.min_reward = result.stats.max_reward = step.reward;
              first_reward = false;
            }
            result.stats.min_reward = std::min(result.stats.min_reward, step.reward);
            result.stats.max_reward = std::max(result.stats.max_reward, step.reward);
            ++result.stats.rewards_seen;
          }
        }
      }
    }
    env_optimizer.learning_rate *= config.lr_decay;
    agent_optimizer.learning_rate *= config.lr_decay;

    EpochRecord train_record{epoch, "train", loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                                            : evaluation_loss(model, config, train_set),
                             evaluate(model, config, train_set)};
    EpochRecord val_record{epoch, "val", evaluation_loss(model, config, val_set), evaluate(model, config, val_set)};
    if (result.best_epoch < 0 || val_record.metrics.accuracy > result.best_val_accuracy) {
      result.best_epoch = epoch;
      result.best_val_accuracy = val_record.metrics.accuracy;
      result.model = model;
    }
    if (on_epoch) on_epoch(train_record, val_record);
    result.history.push_back(std::move(train_record));
    result.history.push_back(std::move(val_record));
  }
  return result;
}

std::vector<SweepRow> sweep(const TrainConfig& config, SweepParameter parameter, std::span<const double> values,
                            const DataSplit& data, bool parallel) {
  if (values.empty()) throw ValidationError("sweep: no values given");
  auto run = [&config, parameter, &data](double value) {
    TrainConfig c = config;
    if (parameter == SweepParameter::gamma) {
      c.agent.gamma = value;
    } else {
      c.lambda = value;
    }
    auto result = train(c, initial_model(c, data.train), data.train, data.val);
    SweepRow row;
    row.value = value;
    row.best_val_accuracy = result.best_val_accuracy;
    row.test = evaluate(result.model, c, data.test);
    return row;
  };
  std::vector<SweepRow> rows;
  if (parallel) {
    std::vector<std::future<SweepRow>> jobs;
    for (double v : values) jobs.push_back(std::async(std::launch::async, run, v));
    for (auto& j : jobs) rows.push_back(j.get());
  } else {
    for (double v : values) rows.push_back(run(v));
  }
  return rows;
}

std::optional<double> AuditReport::clean_rate() const {
  if (clean_total == 0) return std::nullopt;
  return static_cast<double>(clean_retained) / static_cast<double>(clean_total);
}

std::optional<double> AuditReport::corrupted_rate() const {
  if (corrupted_total == 0) return std::nullopt;
  return static_cast<double>(corrupted_retained) / static_cast<double>(corrupted_total);
}

std::optional<double> AuditReport::gap() const {
  auto clean = clean_rate();
  auto corrupted = corrupted_rate();
  if (!clean || !corrupted) return std::nullopt;
  return *clean - *corrupted;
}

AuditReport agent_audit(Model& model, const TrainConfig& config, std::span<const Thread> threads, bool sampled,
                        std::uint64_t seed) {
  for (const auto& t : threads) {
    for (const auto& c : t.comments) {
      if (!c.corrupted) throw ValidationError("audit: thread " + t.id + " has a comment without a corruption flag");
    }
  }
  Rng rng = make_rng(seed, Stream::policy, 1);
  const ActionRule rule = sampled ? ActionRule::policy_sampled : ActionRule::policy_greedy;
  AuditReport report;
  for (const auto& t : threads) {
    const auto encoded = encode(t, model.vocab, model.dims);
    const FrozenBase base = frozen_base(model.env, encoded, model.dims.max_len);
    const auto actions = choose_actions(model, base, encoded, config.agent.view, rule, &rng);
    for (std::size_t i = 0; i < encoded.mask.size(); ++i) {
      if (encoded.mask[i] == 0) continue;
      if (encoded.corrupted[i] != 0) {
        ++report.corrupted_total;
        report.corrupted_retained += actions[i];
      } else {
        ++report.clean_total;
        report.clean_retained += actions[i];
      }
    }
  }
  return report;
}

ModelGradCheck model_gradcheck(Model& model, const TrainConfig& config, std::span<const Thread> threads,
                               std::optional<Op> fault, double h, double tol) {
  if (threads.empty()) throw ValidationError("gradcheck: no threads");
  const auto encoded = encode_all(threads, model.vocab, model.dims);
  Rng rng = make_rng(config.seed, Stream::policy, 2);

  std::vector<std::vector<int>> actions;
  std::vector<EpisodeStep> steps;
  std::vector<FrozenBase> bases;
  for (const auto& thread : encoded) {
    std::vector<int> a(thread.mask.size(), kRemove);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (thread.mask[i] != 0) a[i] = uniform01(rng) < 0.5 ? kRemove : kRetain;
    }
    actions.push_back(a);
    bases.push_back(frozen_base(model.env, thread, model.dims.max_len));
    EpisodeStep step;
    step.observation = observation(bases.back(), model.env.stance_table.value, thread, config.agent.view, a);
    step.actions = a;
    step.discounted_return = 0.75;
    steps.push_back(std::move(step));
  }

  ModelGradCheck out;
  auto env_objective = [&](Tape& tape) {
    auto vars = bind_env(tape, model.env, true);
    std::vector<Var> probs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
      auto base = encode_thread(vars, encoded[i], model.dims.max_len);
      probs.push_back(env_forward(vars, base, encoded[i], actions[i]));
      labels.push_back(encoded[i].label);
    }
    return env_loss(probs, labels, vars.all(), config.lambda);
  };
  out.theta1 = gradcheck(env_objective, model.env.all(), h, tol, fault);

  auto policy_objective = [&](Tape& tape) {
    std::vector<Var> terms;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
      if (encoded[i].real_comments == 0) continue;
      terms.push_back(policy_surrogate(tape, bases[i].tweet, steps[i], encoded[i].mask, model.agent));
    }
    if (terms.empty()) throw ValidationError("gradcheck: no thread has a real comment");
    return add_all(std::span<const Var>(terms));
  };
  out.theta2 = gradcheck(policy_objective, model.agent.all(), h, tol, fault);
  return out;
}

}  // namespace srlf
