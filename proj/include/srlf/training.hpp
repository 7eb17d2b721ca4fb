#pragma once

// Alternating optimization of the detector (theta_1) and the selection policy
// (theta_2), evaluation, sweeps and the stance-selection audit.

#include "srlf/gradcheck.hpp"
#include "srlf/metrics.hpp"
#include "srlf/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace srlf {

enum class Ablation { full, no_pl, no_dl };

/// Actions used by the no_pl ablation.
enum class NoPolicyActions { retain_all, frozen_policy };

struct TrainConfig {
  ModelDims dims;
  AgentConfig agent;
  double lambda = 1e-5;
  double learning_rate = 1e-3;
  double lr_decay = 0.95;
  std::size_t batch_size = 64;
  int epochs = 20;
  Ablation ablation = Ablation::full;
  NoPolicyActions no_pl_actions = NoPolicyActions::retain_all;
  int min_count = 1;
  std::uint64_t seed = 1;

  /// Empty when valid, otherwise every problem found.
  std::vector<std::string> validate() const;

  /// Desk-scale defaults: d = d_w = 48, 16 kernels per size, L = 20, N = 8.
  static TrainConfig desk();
  /// d = d_w = 300, 100 kernels per size, L = 50, h_l = 150.
  static TrainConfig paper();
  /// Small enough for exhaustive finite differences.
  static TrainConfig tiny();
};

/// Evaluation action rule implied by the ablation mode.
ActionRule eval_rule(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  Metrics metrics;
};

struct TrainStats {
  long env_steps = 0;
  long agent_batches = 0;
  long rewards_seen = 0;
  double min_reward = 0.0;
  double max_reward = 0.0;
};

struct TrainResult {
  Model model;  // parameters with the best validation accuracy
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1 when no epoch ran
  double best_val_accuracy = 0.0;
  TrainStats stats;
};

/// Called after every epoch with the records just produced.
using EpochCallback = std::function<void(const EpochRecord& train, const EpochRecord& val)>;

TrainResult train(const TrainConfig& config, Model initial, std::span<const Thread> train_set,
                  std::span<const Thread> val_set, const EpochCallback& on_epoch = nullptr);

/// Builds the vocabulary from the training texts and initializes a model.
Model initial_model(const TrainConfig& config, std::span<const Thread> train_set,
                    const std::optional<std::filesystem::path>& embeddings = std::nullopt);

/// Greedy (or ablation-implied) actions, one forward per thread, argmax class.
Metrics evaluate(Model& model, const TrainConfig& config, std::span<const Thread> threads);

/// Mean env loss (cross-entropy plus penalty) with evaluation-time actions.
double evaluation_loss(Model& model, const TrainConfig& config, std::span<const Thread> threads);

enum class SweepParameter { gamma, lambda };

struct SweepRow {
  double value = 0.0;
  double best_val_accuracy = 0.0;
  Metrics test;
};

/// One train + evaluate per value, same seed for all.
std::vector<SweepRow> sweep(const TrainConfig& config, SweepParameter parameter, std::span<const double> values,
                            const DataSplit& data, bool parallel = false);

struct AuditReport {
  long clean_total = 0;
  long clean_retained = 0;
  long corrupted_total = 0;
  long corrupted_retained = 0;

  std::optional<double> clean_rate() const;
  std::optional<double> corrupted_rate() const;
  /// clean_rate - corrupted_rate, when both exist.
  std::optional<double> gap() const;
};

/// Retain rates for clean vs corrupted weak stance labels. Every comment
/// must carry a corruption flag.
AuditReport agent_audit(Model& model, const TrainConfig& config, std::span<const Thread> threads, bool sampled,
                        std::uint64_t seed = 0);

struct ModelGradCheck {
  GradCheckReport theta1;  // env_loss over the batch
  GradCheckReport theta2;  // policy surrogate over the batch
  bool passed() const { return theta1.passed() && theta2.passed(); }
};

/// Finite-difference check of both objectives on `threads` with sampled
/// actions and a fixed nonzero return.
ModelGradCheck model_gradcheck(Model& model, const TrainConfig& config, std::span<const Thread> threads,
                               std::optional<Op> fault = std::nullopt, double h = 1e-5, double tol = 1e-4);

}  // namespace srlf
