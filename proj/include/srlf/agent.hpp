#pragma once

// The stance-selection policy: BiLSTM over the comment sequence, per-comment
// remove/retain distribution, REINFORCE updates.

#include "srlf/environment.hpp"
#include "srlf/lstm.hpp"
#include "srlf/optim.hpp"

#include <span>
#include <vector>

namespace srlf {

inline constexpr int kRemove = 0;
inline constexpr int kRetain = 1;

/// theta_2.
struct AgentParams {
  LstmParams forward;
  LstmParams backward;
  Parameter pol_w5, pol_b5, pol_w6, pol_b6;

  /// Glorot-uniform weights, zero biases except the LSTM forget gates (1.0).
  static AgentParams init(const ModelDims& dims, Rng& rng);
  std::vector<Parameter*> all();
};

enum class ReturnMode { literal, return_to_go };

/// What the policy reads for each real comment.
///   proposal: c_n + S[stance_n], the comment as it looks with its weak stance retained.
///   state:    the environment's current modified row c~_n (previous step's actions).
enum class AgentView { proposal, state };

struct AgentConfig {
  int episodes = 10;  // K
  double gamma = 0.95;
  ReturnMode return_mode = ReturnMode::literal;
  AgentView view = AgentView::proposal;
};

/// softmax(relu([T, BiLSTM(obs)] W5 + b5) W6 + b6): one {remove, retain}
/// distribution per row of `observation` (the real comments only).
Var policy_probs(const Var& tweet, const Var& observation, AgentParams& params, bool trainable);

/// Length-N actions. Masked positions get 0; real positions are drawn from the
/// corresponding row of `probs` (rows follow the real comments in order), or
/// taken greedily (argmax, ties to remove) when `rng` is null.
std::vector<int> sample_actions(const Matrix& probs, std::span<const int> mask, Rng* rng);

/// literal:      R~_k = R_k * sum_{j=0}^{K-k-1} gamma^j  (k zero-based)
/// return_to_go: R~_k = sum_{j=k}^{K-1} gamma^(j-k) R_j
std::vector<double> compute_returns(std::span<const double> rewards, double gamma, ReturnMode mode);

struct EpisodeStep {
  Matrix observation;              // real_comments x d
  std::vector<int> actions;        // N
  std::vector<double> log_probs;   // N, 0 on masked rows
  double reward = 0.0;
  double discounted_return = 0.0;  // broadcast to every real comment
};

struct EpisodeTrace {
  Matrix tweet;  // 1 x d
  std::vector<int> mask;
  std::vector<EpisodeStep> steps;
};

/// Surrogate sum_n R~ * log P(A_n) over real comments, built on `tape`.
Var policy_surrogate(Tape& tape, const Matrix& tweet, const EpisodeStep& step, std::span<const int> mask,
                     AgentParams& params);

/// One gradient-ascent step on the surrogate. Returns false (and leaves
/// theta_2 untouched) when every weighted term is zero.
bool policy_update(const Matrix& tweet, const EpisodeStep& step, std::span<const int> mask, AgentParams& params,
                   AdamState& state);

/// Base representations computed with frozen theta_1.
struct FrozenBase {
  Matrix tweet;     // 1 x d
  Matrix comments;  // N x d
};

FrozenBase frozen_base(EnvParams& env, const EncodedThread& thread, std::size_t max_len);

/// Policy input rows for the real comments.
Matrix observation(const FrozenBase& base, const Matrix& stance_table, const EncodedThread& thread, AgentView view,
                   std::span<const int> previous_actions);

/// K agent-environment interactions from the all-zero action state with
/// frozen theta_1, followed by K policy updates in step order.
EpisodeTrace run_episodes(EnvParams& env, AgentParams& agent, const EncodedThread& thread, std::size_t max_len,
                          const AgentConfig& config, Rng& rng, AdamState& state);

}  // namespace srlf
