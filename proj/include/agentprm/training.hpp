#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agentprm/labeling.hpp"
#include "agentprm/reward_model.hpp"

namespace agentprm {

enum class OptimizerKind { Sgd, Adam };
enum class TargetCadence { PerBatch, PerEpoch };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);
std::string_view to_string(TargetCadence c);
TargetCadence parse_cadence(std::string_view s);

struct TrainConfig {
  double beta = 1.0;
  int epochs = 5;
  int batch_size = 16;
  /// Unset: default_learning_rate(backend, optimizer).
  std::optional<double> learning_rate;
  std::uint64_t seed = 0;
  TdConfig td;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  TargetCadence cadence = TargetCadence::PerBatch;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

double default_learning_rate(Backend backend, OptimizerKind optimizer);

struct LossReport {
  int epoch = 0;
  int batch = 0;
  double l_q = 0.0;
  double l_a = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

/// Mean of 0.5 (prediction - target)^2.
double loss_q(std::span<const double> predictions, std::span<const double> targets);

/// Mean of 0.5 (dprediction - dQ-hat)^2 over adjacent pairs. The t = 0 pair is
/// taken against q_{-1}, which appears on both sides and cancels.
double loss_a(std::span<const double> predictions, std::span<const LabeledStep> steps);

/// Frozen regression targets for one trajectory.
struct TrajectoryTargets {
  std::vector<ModelInput> inputs;  // one per step
  std::vector<double> q_targets;
  std::optional<ModelInput> begin_input;  // (s_0, BEGIN) item, regressed onto begin_target
  double begin_target = 0.0;
};

struct ObjectiveValue {
  double l_q = 0.0;
  double l_a = 0.0;
  double total = 0.0;
};

/// L_Q + beta * L_A over a batch. L_Q averages over every step and begin item;
/// L_A over every step pair. With `grad`, accumulates the analytic gradient.
/// `advantage_loss` false drops L_A entirely (reported as 0).
ObjectiveValue evaluate_objective(const RewardModel& model, std::span<const TrajectoryTargets> batch,
                                  double beta, bool advantage_loss,
                                  RewardModel::Gradient* grad = nullptr);

/// Plain SGD or Adam over either backend. The tabular backend clamps entries
/// to [0, 1] after each write.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
            double epsilon = 1e-8);
  void step(RewardModel& model, const RewardModel::Gradient& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
  std::unordered_map<std::uint64_t, std::pair<double, double>> sparse_moments_;
};

struct TrainResult {
  RewardModel model;
  std::vector<LossReport> losses;
};

using EpochCallback = std::function<void(int epoch, const RewardModel& model)>;

/// Iterated training for agentprm (targets re-estimated from the frozen current
/// model per batch or per epoch); L_Q on PVM targets for pvm; L_Q on the final
/// step's outcome target for orm.
TrainResult train(RewardModel model, const Environment& env,
                  std::span<const Trajectory> trajectories, const TrainConfig& config,
                  Variant variant, CostLedger& ledger, const EpochCallback& on_epoch = {});

/// Trains on fixed labels (for example Monte-Carlo ones) with L_Q + beta L_A.
TrainResult train_on_labels(RewardModel model, const Environment& env,
                            std::span<const Trajectory> trajectories,
                            std::span<const LabeledStep> labels, const TrainConfig& config,
                            const EpochCallback& on_epoch = {});

/// Encodes every step of a trajectory.
std::vector<ModelInput> encode_trajectory(const RewardModel& model, const Environment& env,
                                          const Trajectory& trajectory);

}  // namespace agentprm
