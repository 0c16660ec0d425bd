#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

enum class PolicyMode { Tabular, Linear };

/// Stochastic softmax policy over an environment's action alphabet.
///
/// Tabular mode keys logits on Environment::policy_key (unseen keys have zero
/// logits). Linear mode computes logits as W * [state_features, 1].
/// Temperature 0 means greedy decoding with lowest-index tie-breaking.
struct Policy {
  PolicyMode mode = PolicyMode::Tabular;
  int num_actions = 0;
  double temperature = 1.0;
  std::unordered_map<std::uint64_t, std::vector<double>> table;
  std::size_t feature_dim = 0;
  std::vector<double> weights;  // num_actions x (feature_dim + 1), row-major

  static Policy tabular(int num_actions, double temperature = 1.0);
  static Policy linear(int num_actions, std::size_t feature_dim, double temperature = 1.0);

  std::vector<double> logits(const Environment& env, const EnvState& state) const;

  bool operator==(const Policy&) const = default;
};

struct ActionDistribution {
  std::vector<Action> actions;  // legal actions, ascending id
  std::vector<double> probs;
};

/// Masked, temperature-scaled softmax over the legal actions of `state`.
ActionDistribution action_distribution(const Policy& policy, const Environment& env,
                                       const EnvState& state);
ActionDistribution action_distribution(const Policy& policy, const Environment& env,
                                       const EnvState& state, double temperature);

/// Inverse-CDF draw. Consumes exactly one uniform from `rng`.
Action sample_action(const ActionDistribution& dist, Rng& rng);

struct TrajectoryStep {
  EnvState state;  // s_t
  Action action;   // a_t
  Observation observation;  // o_{t+1}
};

/// tau = (u, o_0, a_0, ..., o_T, a_T) with the outcome reward r(u, tau).
struct Trajectory {
  Task task;
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;
  EnvState final_state;
  double outcome = 0.0;

  std::size_t length() const { return steps.size(); }
  std::vector<int> action_ids() const;
};

/// Samples until terminal. Deterministic given (policy, task, seed).
Trajectory rollout(const Policy& policy, const Environment& env, const Task& task,
                   std::uint64_t seed);
Trajectory rollout(const Policy& policy, const Environment& env, const Task& task,
                   std::uint64_t seed, double temperature);

/// Continues an episode from `start` using draws from `rng`. Returns the steps
/// taken and the terminal state.
Trajectory continue_rollout(const Policy& policy, const Environment& env, const EnvState& start,
                            double temperature, Rng& rng);

/// n_per_task trajectories per task, ordered task-major. Replicate seeds are
/// derived from (seed, task id, replicate index).
std::vector<Trajectory> rollout_batch(const Policy& policy, const Environment& env,
                                      std::span<const Task> tasks, int n_per_task,
                                      std::uint64_t seed);

std::uint64_t replicate_seed(std::uint64_t seed, const Task& task, int replicate);

/// log pi(tau | s_0) = sum_t log pi(a_t | s_t).
double trajectory_log_prob(const Policy& policy, const Environment& env,
                           const Trajectory& trajectory);

/// Replays an action list from reset(task, seed). Throws a data error if the
/// recorded observations (when given) disagree with the replay.
Trajectory replay(const Environment& env, const Task& task, std::uint64_t seed,
                  std::span<const int> actions,
                  std::span<const std::string> observations = {});

/// Scripted-expert trajectories for behavior cloning.
std::vector<Trajectory> expert_trajectories(const Environment& env, std::span<const Task> tasks,
                                            std::size_t count, std::uint64_t seed);

struct BehaviorCloningConfig {
  int epochs = 20;
  double learning_rate = 0.5;
};

/// Maximum-likelihood fit of the policy logits to the demonstrated actions.
void behavior_clone(Policy& policy, const Environment& env,
                    std::span<const Trajectory> demonstrations,
                    const BehaviorCloningConfig& config);

/// Sparse (tabular) or dense (linear) accumulator matching a policy's layout.
struct PolicyGradient {
  std::unordered_map<std::uint64_t, std::vector<double>> table;
  std::vector<double> weights;
};

/// Adds coeff * d log pi(action | state) / d theta to `grad`.
void accumulate_log_prob_gradient(const Policy& policy, const Environment& env,
                                  const EnvState& state, Action action, double temperature,
                                  double coeff, PolicyGradient& grad);

/// theta += step * grad.
void apply_gradient(Policy& policy, const PolicyGradient& grad, double step);

/// Entropy of a distribution, in nats.
double entropy(std::span<const double> probs);

}  // namespace agentprm
