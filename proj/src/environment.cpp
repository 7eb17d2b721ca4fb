#include "srlf/environment.hpp"

#include <stdexcept>
#include <string>

namespace srlf {

namespace {

Matrix column(std::span<const int> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return m;
}

}  // namespace

EnvParams EnvParams::init(const ModelDims& dims, std::size_t vocab_size, Rng& rng, std::optional<Matrix> embeddings) {
  const Eigen::Index d = dims.hidden_dim;
  EnvParams p;
  if (embeddings) {
    if (embeddings->rows() != static_cast<Eigen::Index>(vocab_size) || embeddings->cols() != dims.word_dim) {
      throw DimensionError("embedding table is " + std::to_string(embeddings->rows()) + "x" +
                           std::to_string(embeddings->cols()) + ", expected " + std::to_string(vocab_size) + "x" +
                           std::to_string(dims.word_dim));
    }
    embeddings->row(text::kPad).setZero();
    p.embedding = Parameter("embedding", std::move(*embeddings), true);
  } else {
    p.embedding = Parameter("embedding", text::random_embeddings(vocab_size, dims.word_dim, rng), true);
  }
  p.encoder = text::EncoderParams::init(dims.kernel_sizes, dims.word_dim, d, rng);
  p.stance_table = Parameter("stance_table", normal_matrix(kStanceCount, d, 0.1, rng));
  p.att_w1 = Parameter("att_w1", glorot_uniform(4 * d, d, rng));
  p.att_b1 = Parameter("att_b1", Matrix::Zero(1, d));
  p.att_w2 = Parameter("att_w2", glorot_uniform(d, 1, rng));
  p.att_b2 = Parameter("att_b2", Matrix::Zero(1, 1));
  p.cls_w3 = Parameter("cls_w3", glorot_uniform(2 * d, d, rng));
  p.cls_b3 = Parameter("cls_b3", Matrix::Zero(1, d));
  p.cls_w4 = Parameter("cls_w4", glorot_uniform(d, dims.classes, rng));
  p.cls_b4 = Parameter("cls_b4", Matrix::Zero(1, dims.classes));
  return p;
}

std::vector<Parameter*> EnvParams::all() {
  std::vector<Parameter*> out{&embedding};
  for (auto* b : encoder.all()) out.push_back(b);
  for (auto* q : {&stance_table, &att_w1, &att_b1, &att_w2, &att_b2, &cls_w3, &cls_b3, &cls_w4, &cls_b4}) {
    out.push_back(q);
  }
  return out;
}

std::vector<Var> EnvVars::all() const {
  std::vector<Var> out{embedding};
  out.insert(out.end(), banks.begin(), banks.end());
  for (const Var& v : {stance_table, att_w1, att_b1, att_w2, att_b2, cls_w3, cls_b3, cls_w4, cls_b4}) {
    out.push_back(v);
  }
  return out;
}

EnvVars bind_env(Tape& tape, EnvParams& p, bool trainable) {
  EnvVars v;
  v.embedding = tape.bind(p.embedding, trainable);
  for (auto& b : p.encoder.banks) v.banks.push_back(tape.bind(b, trainable));
  v.kernel_sizes = p.encoder.kernel_sizes;
  v.stance_table = tape.bind(p.stance_table, trainable);
  v.att_w1 = tape.bind(p.att_w1, trainable);
  v.att_b1 = tape.bind(p.att_b1, trainable);
  v.att_w2 = tape.bind(p.att_w2, trainable);
  v.att_b2 = tape.bind(p.att_b2, trainable);
  v.cls_w3 = tape.bind(p.cls_w3, trainable);
  v.cls_b3 = tape.bind(p.cls_b3, trainable);
  v.cls_w4 = tape.bind(p.cls_w4, trainable);
  v.cls_b4 = tape.bind(p.cls_b4, trainable);
  return v;
}

BaseRepresentation encode_thread(const EnvVars& env, const EncodedThread& thread, std::size_t max_len) {
  const auto n = static_cast<Eigen::Index>(thread.mask.size());
  const auto real = static_cast<Eigen::Index>(thread.real_comments);
  std::vector<int> ids = thread.source_ids;
  ids.insert(ids.end(), thread.comment_ids.begin(), thread.comment_ids.end());
  Var encoded = text::encode_texts(env.embedding, env.banks, env.kernel_sizes, ids, max_len);
  Tape& tape = env.embedding.tape();
  BaseRepresentation base;
  base.tweet = slice_rows(encoded, Eigen::Index(0), Eigen::Index(1));
  if (real == 0) {
    base.comments = tape.constant(Matrix::Zero(n, encoded.cols()));
  } else if (real == n) {
    base.comments = slice_rows(encoded, Eigen::Index(1), real);
  } else {
    std::vector<Var> parts{slice_rows(encoded, Eigen::Index(1), real),
                           tape.constant(Matrix::Zero(n - real, encoded.cols()))};
    base.comments = concat_rows(std::span<const Var>(parts));
  }
  return base;
}

Var apply_actions(const Var& comments, const Var& stance_table, std::span<const int> stances,
                  std::span<const int> actions, std::span<const int> mask) {
  const auto n = static_cast<std::size_t>(comments.rows());
  if (stances.size() != n || actions.size() != n || mask.size() != n) {
    throw DimensionError("apply_actions: stance/action/mask lengths must equal the comment count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i] != 0 && actions[i] != 1) {
      throw std::invalid_argument("apply_actions: action " + std::to_string(actions[i]) + " outside {0,1}");
    }
    if (mask[i] == 0 && actions[i] != 0) throw std::invalid_argument("apply_actions: masked comment with action 1");
    if (stances[i] < 0 || stances[i] >= stance_table.rows()) throw std::invalid_argument("apply_actions: bad stance id");
  }
  Tape& tape = comments.tape();
  auto injected = mul_col(gather_rows(stance_table, stances), tape.constant(column(actions)));
  return add(comments, injected);
}

Attention attend(const Var& tweet, const Var& modified, std::span<const int> mask, const EnvVars& env) {
  if (static_cast<Eigen::Index>(mask.size()) != modified.rows()) throw DimensionError("attend: mask length");
  Tape& tape = tweet.tape();
  auto tiled = repeat_rows(tweet, modified.rows());
  auto features = concat_cols({tiled, modified, sub(tiled, modified), mul(tiled, modified)});
  auto z1 = relu(add_row(matmul(features, env.att_w1), env.att_b1));
  auto alpha = relu(add_row(matmul(z1, env.att_w2), env.att_b2));
  alpha = mul(alpha, tape.constant(column(mask)));
  return Attention{matmul(transpose(alpha), modified), alpha};
}

Var classify(const Var& tweet, const Var& fused, const EnvVars& env) {
  auto z2 = relu(add_row(matmul(concat_cols({tweet, fused}), env.cls_w3), env.cls_b3));
  return softmax_rows(add_row(matmul(z2, env.cls_w4), env.cls_b4));
}

Var env_forward(const EnvVars& env, const BaseRepresentation& base, const EncodedThread& thread,
                std::span<const int> actions) {
  auto modified = apply_actions(base.comments, env.stance_table, thread.stances, actions, thread.mask);
  auto attention = attend(base.tweet, modified, thread.mask, env);
  return classify(base.tweet, attention.fused, env);
}

Var env_loss(std::span<const Var> probs, std::span<const int> labels, std::span<const Var> regularized,
             double lambda) {
  if (probs.empty() || probs.size() != labels.size()) throw DimensionError("env_loss: need one label per prediction");
  if (lambda < 0.0) throw std::invalid_argument("env_loss: lambda must be >= 0");
  std::vector<Var> terms;
  terms.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs[i].cols()) throw std::invalid_argument("env_loss: label out of range");
    if (probs[i].value()(0, labels[i]) <= 0.0) throw NumericError("env_loss: zero probability at the true label");
    terms.push_back(log(pick(probs[i], Eigen::Index(0), Eigen::Index(labels[i]))));
  }
  auto loss = scale(add_all(std::span<const Var>(terms)), -1.0 / static_cast<double>(probs.size()));
  if (lambda > 0.0 && !regularized.empty()) {
    std::vector<Var> norms;
    for (const Var& v : regularized) norms.push_back(squared_norm(v));
    loss = add(loss, scale(add_all(std::span<const Var>(norms)), lambda / 2.0));
  }
  return loss;
}

double reward(const Matrix& probs, int true_label) {
  if (probs.rows() != 1 || true_label < 0 || true_label >= probs.cols()) {
    throw std::invalid_argument("reward: expected a 1 x r distribution and a valid label");
  }
  return probs(0, true_label) - 1.0 / static_cast<double>(probs.cols());
}

}  // namespace srlf
