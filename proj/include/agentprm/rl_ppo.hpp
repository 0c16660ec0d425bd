#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agentprm/labeling.hpp"
#include "agentprm/policy.hpp"
#include "agentprm/reward_model.hpp"

namespace agentprm {

enum class RewardSource { AgentPrm, Pvm, Orm, EnvOracle };

std::string_view to_string(RewardSource s);
RewardSource parse_reward_source(std::string_view s);

struct PpoConfig {
  int batch_size = 16;
  /// Step size on the policy logits.
  double learning_rate = 0.5;
  /// Weight of the per-step KL(pi || pi_ref) penalty in the rewards; the same
  /// weight anchors each policy step to the reference parameters.
  double kl_coeff = 1e-3;
  double temperature = 1.0;
  int horizon = 20;
  int iterations = 200;
  double clip_ratio = 0.2;
  int update_epochs = 4;
  RewardSource reward_source = RewardSource::EnvOracle;
  /// Adds per-step score differences of the reward model as shaped rewards.
  bool dense_rewards = false;
  bool normalize_advantages = true;
  double critic_learning_rate = 0.5;
  TdConfig gae;
};

void validate(const PpoConfig& config);

struct RlReport {
  int iteration = 0;
  double mean_task_score = 0.0;  // greedy success on the evaluation tasks
  double mean_rm_reward = 0.0;   // mean trajectory reward from the reward source
  double kl_to_reference = 0.0;  // mean per-step KL(pi || pi_ref) over the batch
};

/// Rollouts for one PPO iteration. Depends only on (policy, tasks, seed,
/// iteration), never on the reward source.
std::vector<Trajectory> collect_ppo_batch(const Policy& policy, const Environment& env,
                                          std::span<const Task> tasks, const PpoConfig& config,
                                          std::uint64_t seed, int iteration);

/// KL(p || q) between the policies' action distributions at `state`.
double policy_kl(const Policy& p, const Policy& q, const Environment& env, const EnvState& state,
                 double temperature);

/// Mean greedy outcome over `tasks`.
double greedy_score(const Policy& policy, const Environment& env, std::span<const Task> tasks,
                    std::uint64_t seed);

struct PpoResult {
  Policy policy;
  std::vector<RlReport> reports;
  std::uint64_t env_steps = 0;  // steps taken by training rollouts
};

using IterationCallback = std::function<void(const RlReport& report, const Policy& policy)>;

/// `model` may be null only for the env-oracle source. Report 0 is the
/// evaluation of the initial policy; report i follows update i.
PpoResult ppo_train(Policy policy, const RewardModel* model, const Environment& env,
                    std::span<const Task> train_tasks, std::span<const Task> eval_tasks,
                    const PpoConfig& config, std::uint64_t seed,
                    const IterationCallback& on_iteration = {});

}  // namespace agentprm
