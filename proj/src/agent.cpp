#include "srlf/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace srlf {

namespace {

LstmParams init_lstm(const std::string& prefix, Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  LstmParams p;
  p.input_weights = Parameter(prefix + "_wx", glorot_uniform(input, 4 * hidden, rng));
  p.recurrent_weights = Parameter(prefix + "_wh", glorot_uniform(hidden, 4 * hidden, rng));
  Matrix bias = Matrix::Zero(1, 4 * hidden);
  bias.middleCols(hidden, hidden).setOnes();
  p.bias = Parameter(prefix + "_b", std::move(bias));
  return p;
}

std::size_t real_count(std::span<const int> mask) {
  std::size_t n = 0;
  for (int m : mask) n += m != 0 ? 1 : 0;
  return n;
}

}  // namespace

AgentParams AgentParams::init(const ModelDims& dims, Rng& rng) {
  const Eigen::Index d = dims.hidden_dim;
  const Eigen::Index h = dims.lstm_hidden;
  AgentParams p;
  p.forward = init_lstm("lstm_fwd", d, h, rng);
  p.backward = init_lstm("lstm_bwd", d, h, rng);
  p.pol_w5 = Parameter("pol_w5", glorot_uniform(d + 2 * h, d, rng));
  p.pol_b5 = Parameter("pol_b5", Matrix::Zero(1, d));
  p.pol_w6 = Parameter("pol_w6", glorot_uniform(d, 2, rng));
  p.pol_b6 = Parameter("pol_b6", Matrix::Zero(1, 2));
  return p;
}

std::vector<Parameter*> AgentParams::all() {
  std::vector<Parameter*> out = forward.all();
  for (auto* p : backward.all()) out.push_back(p);
  for (auto* p : {&pol_w5, &pol_b5, &pol_w6, &pol_b6}) out.push_back(p);
  return out;
}

Var policy_probs(const Var& tweet, const Var& observation, AgentParams& params, bool trainable) {
  Tape& tape = tweet.tape();
  auto sequence = lstm_bidirectional(observation, params.forward, params.backward, trainable);
  auto features = concat_cols({repeat_rows(tweet, observation.rows()), sequence});
  auto z3 = relu(add_row(matmul(features, tape.bind(params.pol_w5, trainable)), tape.bind(params.pol_b5, trainable)));
  return softmax_rows(add_row(matmul(z3, tape.bind(params.pol_w6, trainable)), tape.bind(params.pol_b6, trainable)));
}

std::vector<int> sample_actions(const Matrix& probs, std::span<const int> mask, Rng* rng) {
  if (static_cast<std::size_t>(probs.rows()) != real_count(mask) || (probs.rows() > 0 && probs.cols() != 2)) {
    throw DimensionError("sample_actions: need one 2-way row per real comment");
  }
  std::vector<int> actions(mask.size(), kRemove);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0) continue;
    const double retain = probs(row++, kRetain);
    if (rng == nullptr) {
      actions[i] = retain > probs(row - 1, kRemove) ? kRetain : kRemove;
    } else {
      actions[i] = uniform01(*rng) < retain ? kRetain : kRemove;
    }
  }
  return actions;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma, ReturnMode mode) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("compute_returns: gamma must lie in [0, 1]");
  const std::size_t k_total = rewards.size();
  std::vector<double> out(k_total, 0.0);
  if (mode == ReturnMode::literal) {
    for (std::size_t k = 0; k < k_total; ++k) {
      const auto terms = static_cast<double>(k_total - k);
      double series = terms;
      if (gamma < 1.0) series = -std::expm1(terms * std::log(gamma)) / (1.0 - gamma);
      out[k] = rewards[k] * series;
    }
  } else {
    double running = 0.0;
    for (std::size_t k = k_total; k-- > 0;) {
      running = rewards[k] + gamma * running;
      out[k] = running;
    }
  }
  return out;
}

Var policy_surrogate(Tape& tape, const Matrix& tweet, const EpisodeStep& step, std::span<const int> mask,
                     AgentParams& params) {
  auto probs = policy_probs(tape.constant(tweet), tape.constant(step.observation), params, true);
  auto log_probs = log(probs);
  std::vector<Var> terms;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0) continue;
    terms.push_back(scale(pick(log_probs, row++, Eigen::Index(step.actions[i])), step.discounted_return));
  }
  return add_all(std::span<const Var>(terms));
}

bool policy_update(const Matrix& tweet, const EpisodeStep& step, std::span<const int> mask, AgentParams& params,
                   AdamState& state) {
  if (real_count(mask) == 0 || step.discounted_return == 0.0) return false;
  auto all = params.all();
  for (auto* p : all) p->zero_grad();
  {
    Tape tape;
    tape.backward(policy_surrogate(tape, tweet, step, mask, params));
  }
  adam_step(all, state, Direction::ascent);
  return true;
}

FrozenBase frozen_base(EnvParams& env, const EncodedThread& thread, std::size_t max_len) {
  Tape tape;
  auto vars = bind_env(tape, env, false);
  auto base = encode_thread(vars, thread, max_len);
  return FrozenBase{base.tweet.value(), base.comments.value()};
}

Matrix observation(const FrozenBase& base, const Matrix& stance_table, const EncodedThread& thread, AgentView view,
                   std::span<const int> previous_actions) {
  const auto real = static_cast<Eigen::Index>(thread.real_comments);
  Matrix obs = base.comments.topRows(real);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < thread.mask.size(); ++i) {
    if (thread.mask[i] == 0) continue;
    const bool inject = view == AgentView::proposal || previous_actions[i] == kRetain;
    if (inject) obs.row(row) += stance_table.row(thread.stances[i]);
    ++row;
  }
  return obs;
}

EpisodeTrace run_episodes(EnvParams& env, AgentParams& agent, const EncodedThread& thread, std::size_t max_len,
                          const AgentConfig& config, Rng& rng, AdamState& state) {
  if (config.episodes < 1) throw std::invalid_argument("run_episodes: K must be >= 1");
  EpisodeTrace trace;
  trace.mask = thread.mask;

  // theta_1 is frozen for the whole interaction; theta_2 only changes after
  // all K steps, so one constant tape serves every forward pass.
  Tape tape;
  auto env_vars = bind_env(tape, env, false);
  auto base = encode_thread(env_vars, thread, max_len);
  const FrozenBase frozen{base.tweet.value(), base.comments.value()};
  trace.tweet = frozen.tweet;
  auto tweet = tape.constant(frozen.tweet);

  std::vector<int> previous(thread.mask.size(), kRemove);
  for (int k = 0; k < config.episodes; ++k) {
    EpisodeStep step;
    step.observation = observation(frozen, env.stance_table.value, thread, config.view, previous);
    step.log_probs.assign(thread.mask.size(), 0.0);
    if (thread.real_comments > 0) {
      Matrix probs = policy_probs(tweet, tape.constant(step.observation), agent, false).value();
      step.actions = sample_actions(probs, thread.mask, &rng);
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < thread.mask.size(); ++i) {
        if (thread.mask[i] == 0) continue;
        step.log_probs[i] = std::log(probs(row++, step.actions[i]));
      }
    } else {
      step.actions.assign(thread.mask.size(), kRemove);
    }
    const Matrix class_probs = env_forward(env_vars, base, thread, step.actions).value();
    step.reward = reward(class_probs, thread.label);
    previous = step.actions;
    trace.steps.push_back(std::move(step));
  }

  std::vector<double> rewards;
  for (const auto& s : trace.steps) rewards.push_back(s.reward);
  const auto returns = compute_returns(rewards, config.gamma, config.return_mode);
  for (std::size_t k = 0; k < trace.steps.size(); ++k) trace.steps[k].discounted_return = returns[k];

  for (const auto& s : trace.steps) policy_update(trace.tweet, s, trace.mask, agent, state);
  return trace;
}

}  // namespace srlf
