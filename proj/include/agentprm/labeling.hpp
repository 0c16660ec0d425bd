#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/policy.hpp"
#include "agentprm/reward_model.hpp"

namespace agentprm {

/// How q_{-1}, the value before the first action, is obtained.
enum class V0Mode {
  Zero,
  /// The model scores (s_0, BEGIN) with the reserved begin pseudo-action.
  LearnedBeginToken,
};

std::string_view to_string(V0Mode m);
V0Mode parse_v0_mode(std::string_view s);

struct TdConfig {
  double gamma = 1.0;
  double lambda = 0.95;
  V0Mode v0_mode = V0Mode::LearnedBeginToken;
};

/// Sampling cost of a labeling run. env_steps is the token-count proxy.
struct CostLedger {
  std::uint64_t env_steps = 0;
  std::uint64_t rollouts = 0;
  std::uint64_t labeled_steps = 0;

  void record_rollout(std::size_t steps) {
    ++rollouts;
    env_steps += steps;
  }
  CostLedger& operator+=(const CostLedger& other);
  bool operator==(const CostLedger&) const = default;
};

/// Trajectory collection with cost accounting.
std::vector<Trajectory> collect_trajectories(const Policy& policy, const Environment& env,
                                             std::span<const Task> tasks, int n_per_task,
                                             std::uint64_t seed, CostLedger& ledger);

/// delta_t = gamma q_t - q_{t-1} for t < T and delta_T = r_T - q_{T-1}, with
/// q_{-1} = v0. `q` holds q_0 .. q_T.
std::vector<double> td_residuals(std::span<const double> q, double v0, double outcome,
                                 double gamma);

/// A_T = delta_T, A_t = delta_t + decay * A_{t+1}.
std::vector<double> gae_backward(std::span<const double> deltas, double decay);

struct GaeTargets {
  std::vector<double> advantages;  // backward recursion output
  std::vector<double> q_targets;   // Q-hat_t = A_t + q_{t-1}; Q-hat_T = r_T
  std::vector<double> adv_targets; // Q-hat_t - q_{t-1}
};

/// Targets for one trajectory from frozen model scores.
GaeTargets td_gae_targets(std::span<const double> q, double v0, double outcome,
                          const TdConfig& config);

/// q_{-1} for a trajectory under `config.v0_mode`.
double begin_value(const RewardModel& model, const Environment& env, const Trajectory& trajectory,
                   const TdConfig& config);

/// TD-based labels with GAE from the current (frozen) model. No rollouts.
std::vector<LabeledStep> estimate_td_gae(const RewardModel& model, const Environment& env,
                                         std::span<const Trajectory> trajectories,
                                         const TdConfig& config, CostLedger& ledger);

/// Outcomes of every resumed rollout, indexed [trajectory][step][rollout].
struct McTrace {
  std::vector<std::vector<std::vector<double>>> outcomes;
};

/// Monte-Carlo labels: from s_{t+1}, run n_mc policy rollouts; Q-hat = 1 when
/// any reaches `success_threshold`. The terminal step is pinned to the
/// outcome. A-hat is the forward difference with Q-hat_{-1} = 0.
std::vector<LabeledStep> estimate_mc(const Policy& policy, const Environment& env,
                                     std::span<const Trajectory> trajectories, int n_mc,
                                     double success_threshold, CostLedger& ledger,
                                     std::uint64_t seed, McTrace* trace = nullptr);

/// mc.env_steps / td.env_steps.
double cost_ratio(const CostLedger& mc, const CostLedger& td);

}  // namespace agentprm
