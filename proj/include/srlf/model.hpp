#pragma once

#include "srlf/agent.hpp"
#include "srlf/data.hpp"
#include "srlf/environment.hpp"
#include "srlf/text.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace srlf {

/// Vocabulary plus both parameter sets.
struct Model {
  ModelDims dims;
  text::Vocab vocab;
  EnvParams env;
  AgentParams agent;

  static Model init(const ModelDims& dims, text::Vocab vocab, std::uint64_t seed,
                    std::optional<Matrix> embeddings = std::nullopt);

  /// theta_1 followed by theta_2, in a fixed order.
  std::vector<Parameter*> all();
};

EncodedThread encode(const Thread& thread, const text::Vocab& vocab, const ModelDims& dims);
std::vector<EncodedThread> encode_all(std::span<const Thread> threads, const text::Vocab& vocab,
                                      const ModelDims& dims);

/// How evaluation-time actions are chosen.
enum class ActionRule { policy_greedy, policy_sampled, retain_all };

std::vector<int> choose_actions(Model& model, const FrozenBase& base, const EncodedThread& thread, AgentView view,
                                ActionRule rule, Rng* rng = nullptr);

struct Prediction {
  Matrix probs;  // 1 x r
  std::vector<int> actions;
  int predicted = 0;  // argmax, ties to the lowest class
};

Prediction predict(Model& model, const EncodedThread& thread, AgentView view, ActionRule rule, Rng* rng = nullptr);

}  // namespace srlf
