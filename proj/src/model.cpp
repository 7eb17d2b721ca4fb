#include "srlf/model.hpp"

namespace srlf {

Model Model::init(const ModelDims& dims, text::Vocab vocab, std::uint64_t seed, std::optional<Matrix> embeddings) {
  Rng rng = make_rng(seed, Stream::init);
  Model m;
  m.dims = dims;
  m.env = EnvParams::init(dims, vocab.size(), rng, std::move(embeddings));
  m.agent = AgentParams::init(dims, rng);
  m.vocab = std::move(vocab);
  return m;
}

std::vector<Parameter*> Model::all() {
  std::vector<Parameter*> out = env.all();
  for (auto* p : agent.all()) out.push_back(p);
  return out;
}

EncodedThread encode(const Thread& thread, const text::Vocab& vocab, const ModelDims& dims) {
  EncodedThread e;
  e.source_ids = vocab.encode(thread.source, dims.max_len);
  e.real_comments = std::min(thread.comments.size(), dims.max_comments);
  e.stances.assign(dims.max_comments, 0);
  e.mask.assign(dims.max_comments, 0);
  e.corrupted.assign(dims.max_comments, 0);
  for (std::size_t i = 0; i < e.real_comments; ++i) {
    const Comment& c = thread.comments[i];
    auto ids = vocab.encode(c.text, dims.max_len);
    e.comment_ids.insert(e.comment_ids.end(), ids.begin(), ids.end());
    e.stances[i] = static_cast<int>(c.stance);
    e.mask[i] = 1;
    e.corrupted[i] = c.corrupted.value_or(false) ? 1 : 0;
  }
  e.label = static_cast<int>(thread.label);
  return e;
}

std::vector<EncodedThread> encode_all(std::span<const Thread> threads, const text::Vocab& vocab,
                                      const ModelDims& dims) {
  std::vector<EncodedThread> out;
  out.reserve(threads.size());
  for (const auto& t : threads) out.push_back(encode(t, vocab, dims));
  return out;
}

std::vector<int> choose_actions(Model& model, const FrozenBase& base, const EncodedThread& thread, AgentView view,
                                ActionRule rule, Rng* rng) {
  if (rule == ActionRule::retain_all) return thread.mask;
  if (thread.real_comments == 0) return std::vector<int>(thread.mask.size(), kRemove);
  const std::vector<int> none(thread.mask.size(), kRemove);
  Tape tape;
  auto obs = observation(base, model.env.stance_table.value, thread, view, none);
  Matrix probs = policy_probs(tape.constant(base.tweet), tape.constant(obs), model.agent, false).value();
  return sample_actions(probs, thread.mask, rule == ActionRule::policy_sampled ? rng : nullptr);
}

Prediction predict(Model& model, const EncodedThread& thread, AgentView view, ActionRule rule, Rng* rng) {
  Tape tape;
  auto vars = bind_env(tape, model.env, false);
  auto base = encode_thread(vars, thread, model.dims.max_len);
  const FrozenBase frozen{base.tweet.value(), base.comments.value()};
  Prediction p;
  p.actions = choose_actions(model, frozen, thread, view, rule, rng);
  p.probs = env_forward(vars, base, thread, p.actions).value();
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p.probs.cols(); ++c) {
    if (p.probs(0, c) > p.probs(0, best)) best = c;
  }
  p.predicted = static_cast<int>(best);
  return p;
}

}  // namespace srlf
