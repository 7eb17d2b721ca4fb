#pragma once

// The rumor detector: stance injection, attention fusion, classification,
// supervised loss and the reward handed to the agent.

#include "srlf/labels.hpp"
#include "srlf/rng.hpp"
#include "srlf/tensor.hpp"
#include "srlf/text.hpp"

#include <optional>
#include <span>
#include <vector>

namespace srlf {

struct ModelDims {
  Eigen::Index word_dim = 48;     // d_w
  Eigen::Index hidden_dim = 48;   // d
  std::size_t max_len = 20;       // L
  std::size_t max_comments = 8;   // N
  Eigen::Index lstm_hidden = 24;  // h_l
  int classes = kClassCount;      // r
  std::vector<int> kernel_sizes{3, 4, 5};
};

/// theta_1: every parameter of the environment.
struct EnvParams {
  Parameter embedding;  // V x d_w, row 0 = PAD
  text::EncoderParams encoder;
  Parameter stance_table;  // 4 x d
  Parameter att_w1, att_b1, att_w2, att_b2;
  Parameter cls_w3, cls_b3, cls_w4, cls_b4;

  /// Glorot-uniform matrices, zero biases, N(0, 0.1^2) stance rows. When
  /// `embeddings` is absent the table is drawn like out-of-vocabulary rows.
  static EnvParams init(const ModelDims& dims, std::size_t vocab_size, Rng& rng,
                        std::optional<Matrix> embeddings = std::nullopt);
  std::vector<Parameter*> all();
};

/// Per-thread token ids and labels laid out for fixed L and N. Comments
/// beyond N are dropped (earliest kept); missing ones are masked.
struct EncodedThread {
  std::vector<int> source_ids;   // L
  std::vector<int> comment_ids;  // real_comments * L
  std::vector<int> stances;      // N, 0 on padding
  std::vector<int> mask;         // N, 1 = real comment
  std::vector<int> corrupted;    // N, 1 = stance known to be corrupted (synthetic data only)
  int label = 0;
  std::size_t real_comments = 0;
};

/// theta_1 placed on a tape, trainable or as constants.
struct EnvVars {
  Var embedding;
  std::vector<Var> banks;
  std::vector<int> kernel_sizes;
  Var stance_table;
  Var att_w1, att_b1, att_w2, att_b2;
  Var cls_w3, cls_b3, cls_w4, cls_b4;

  std::vector<Var> all() const;
};

EnvVars bind_env(Tape& tape, EnvParams& params, bool trainable);

struct BaseRepresentation {
  Var tweet;     // 1 x d
  Var comments;  // N x d, zero rows at masked positions
};

BaseRepresentation encode_thread(const EnvVars& env, const EncodedThread& thread, std::size_t max_len);

/// c~_n = c_n + A_n * S[stance_n]. Actions must be 0/1 and 0 on masked rows.
Var apply_actions(const Var& comments, const Var& stance_table, std::span<const int> stances,
                  std::span<const int> actions, std::span<const int> mask);

struct Attention {
  Var fused;    // 1 x d
  Var weights;  // N x 1, zero on masked rows
};

/// Double-ReLU attention of the tweet over the modified comment rows.
Attention attend(const Var& tweet, const Var& modified, std::span<const int> mask, const EnvVars& env);

/// softmax(relu([t, c] W3 + b3) W4 + b4) as a 1 x r row.
Var classify(const Var& tweet, const Var& fused, const EnvVars& env);

/// Full forward from base representations and actions to class probabilities.
Var env_forward(const EnvVars& env, const BaseRepresentation& base, const EncodedThread& thread,
                std::span<const int> actions);

/// mean_i(-ln p_i[y_i]) + (lambda / 2) * sum ||theta||^2.
Var env_loss(std::span<const Var> probs, std::span<const int> labels, std::span<const Var> regularized,
             double lambda);

/// p_true - 1 / r.
double reward(const Matrix& probs, int true_label);

}  // namespace srlf
