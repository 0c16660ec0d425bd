#include "agentprm/rl_ppo.hpp"

#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "agentprm/error.hpp"
#include "agentprm/inference.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

std::string_view to_string(RewardSource s) {
  switch (s) {
    case RewardSource::AgentPrm: return "agentprm";
    case RewardSource::Pvm: return "pvm";
    case RewardSource::Orm: return "orm";
    case RewardSource::EnvOracle: return "env-oracle";
  }
  return "?";
}

RewardSource parse_reward_source(std::string_view s) {
  if (s == "agentprm") return RewardSource::AgentPrm;
  if (s == "pvm") return RewardSource::Pvm;
  if (s == "orm") return RewardSource::Orm;
  if (s == "env-oracle") return RewardSource::EnvOracle;
  throw Error(ErrorKind::Config, fmt::format("unknown reward source '{}'", s));
}

void validate(const PpoConfig& c) {
  if (c.batch_size < 1 || c.iterations < 0 || c.update_epochs < 1 || c.horizon < 1) {
    throw Error(ErrorKind::Config, "ppo batch_size, update_epochs and horizon must be >= 1");
  }
  if (!(c.temperature > 0.0)) throw Error(ErrorKind::Config, "ppo temperature must be positive");
  if (!(c.learning_rate >= 0.0) || !(c.kl_coeff >= 0.0) || !(c.clip_ratio >= 0.0) ||
      !(c.critic_learning_rate >= 0.0)) {
    throw Error(ErrorKind::Config, "ppo rates, kl_coeff and clip_ratio must be >= 0");
  }
}

std::vector<Trajectory> collect_ppo_batch(const Policy& policy, const Environment& env,
                                          std::span<const Task> tasks, const PpoConfig& config,
                                          std::uint64_t seed, int iteration) {
  if (tasks.empty()) throw Error(ErrorKind::Config, "ppo needs at least one training task");
  Rng pick(derive_seed(seed, 0x70706fULL, static_cast<std::uint64_t>(iteration)));
  std::vector<Trajectory> out;
  for (int b = 0; b < config.batch_size; ++b) {
    Task task = tasks[pick.below(tasks.size())];
    task.horizon = config.horizon;
    auto s = derive_seed(seed, 0x70706fULL, static_cast<std::uint64_t>(iteration),
                         static_cast<std::uint64_t>(b) + 1);
    out.push_back(rollout(policy, env, task, s, config.temperature));
  }
  return out;
}

double policy_kl(const Policy& p, const Policy& q, const Environment& env, const EnvState& state,
                 double temperature) {
  auto dp = action_distribution(p, env, state, temperature);
  auto dq = action_distribution(q, env, state, temperature);
  double kl = 0.0;
  for (std::size_t i = 0; i < dp.probs.size(); ++i) {
    if (dp.probs[i] > 0.0) kl += dp.probs[i] * (std::log(dp.probs[i]) - std::log(dq.probs[i]));
  }
  return std::max(kl, 0.0);
}

double greedy_score(const Policy& policy, const Environment& env, std::span<const Task> tasks,
                    std::uint64_t seed) {
  if (tasks.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : tasks) sum += greedy_decode(policy, env, t, seed).outcome;
  return sum / static_cast<double>(tasks.size());
}

namespace {

double log_prob(const Policy& policy, const Environment& env, const EnvState& s, Action a,
                double temperature) {
  auto d = action_distribution(policy, env, s, temperature);
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    if (d.actions[i] == a) return std::log(d.probs[i]);
  }
  return -std::numeric_limits<double>::infinity();
}

bool finite_policy(const Policy& p) {
  for (const auto& [k, row] : p.table) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (double w : p.weights) {
    if (!std::isfinite(w)) return false;
  }
  return true;
}

// theta += (lr g - lr k (theta - theta_ref)) / (1 + lr k): a proximal step on
// ascent of the surrogate with a quadratic pull of strength k to the reference.
void anchored_step(Policy& policy, const Policy& reference, const PolicyGradient& grad, double lr,
                   double k) {
  double shrink = 1.0 + lr * k;
  if (policy.mode == PolicyMode::Linear) {
    for (std::size_t i = 0; i < policy.weights.size(); ++i) {
      double g = grad.weights.empty() ? 0.0 : grad.weights[i];
      policy.weights[i] += (lr * g - lr * k * (policy.weights[i] - reference.weights[i])) / shrink;
    }
    return;
  }
  for (const auto& [key, g] : grad.table) {
    auto& row = policy.table[key];
    if (row.empty()) row.assign(g.size(), 0.0);
  }
  const std::vector<double> zeros(static_cast<std::size_t>(policy.num_actions), 0.0);
  for (auto& [key, row] : policy.table) {
    auto r = reference.table.find(key);
    const auto& ref = r == reference.table.end() ? zeros : r->second;
    auto gi = grad.table.find(key);
    for (std::size_t b = 0; b < row.size(); ++b) {
      double g = gi == grad.table.end() ? 0.0 : gi->second[b];
      row[b] += (lr * g - lr * k * (row[b] - ref[b])) / shrink;
    }
  }
}

}  // namespace

PpoResult ppo_train(Policy policy, const RewardModel* model, const Environment& env,
                    std::span<const Task> train_tasks, std::span<const Task> eval_tasks,
                    const PpoConfig& config, std::uint64_t seed,
                    const IterationCallback& on_iteration) {
  validate(config);
  if (train_tasks.empty()) throw Error(ErrorKind::Config, "ppo needs at least one training task");
  if (model == nullptr && config.reward_source != RewardSource::EnvOracle) {
    throw Error(ErrorKind::Config, "reward source needs a trained reward model");
  }
  std::vector<Task> eval(eval_tasks.begin(), eval_tasks.end());
  for (auto& t : eval) t.horizon = config.horizon;

  const Policy reference = policy;
  std::unordered_map<std::uint64_t, double> critic;
  PpoResult result;
  result.reports.push_back(RlReport{0, greedy_score(policy, env, eval, seed), 0.0, 0.0});
  if (on_iteration) on_iteration(result.reports.back(), policy);

  for (int it = 1; it <= config.iterations; ++it) {
    auto batch = collect_ppo_batch(policy, env, train_tasks, config, seed, it);
    for (const auto& t : batch) result.env_steps += t.length();

    struct Sample {
      const EnvState* state;
      Action action;
      double old_log_prob;
      double advantage;
    };
    std::vector<Sample> samples;
    std::vector<std::pair<std::uint64_t, double>> value_targets;
    double reward_sum = 0.0;
    double kl_sum = 0.0;
    std::size_t step_count = 0;

    for (const auto& traj : batch) {
      std::size_t len = traj.steps.size();
      std::vector<double> rewards(len, 0.0);
      double source_reward = traj.outcome;
      if (config.reward_source != RewardSource::EnvOracle) {
        source_reward = trajectory_score(*model, env, traj);
        if (config.dense_rewards) {
          double prev = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            double q = model->score(env, traj.steps[t].state, traj.steps[t].action);
            rewards[t] += q - prev;
            prev = q;
          }
        } else {
          rewards[len - 1] += source_reward;
        }
      } else {
        rewards[len - 1] += source_reward;
      }
      reward_sum += source_reward;
      for (std::size_t t = 0; t < len; ++t) {
        double kl = policy_kl(policy, reference, env, traj.steps[t].state, config.temperature);
        kl_sum += kl;
        rewards[t] -= config.kl_coeff * kl;
      }
      step_count += len;

      // delta_t = r_t + gamma V(s_{t+1}) - V(s_t), with V = 0 past the terminal step.
      std::vector<double> values(len + 1, 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        auto found = critic.find(env.model_key(traj.steps[t].state));
        values[t] = found == critic.end() ? 0.0 : found->second;
      }
      std::vector<double> delta(len);
      for (std::size_t t = 0; t < len; ++t) {
        delta[t] = rewards[t] + config.gae.gamma * values[t + 1] - values[t];
      }
      auto adv = gae_backward(delta, config.gae.gamma * config.gae.lambda);
      for (std::size_t t = 0; t < len; ++t) {
        const auto& step = traj.steps[t];
        samples.push_back(Sample{&step.state, step.action,
                                 log_prob(policy, env, step.state, step.action, config.temperature),
                                 adv[t]});
        value_targets.emplace_back(env.model_key(step.state), adv[t] + values[t]);
      }
    }

    if (config.normalize_advantages && samples.size() > 1) {
      double mean = 0.0;
      for (const auto& s : samples) mean += s.advantage;
      mean /= static_cast<double>(samples.size());
      double var = 0.0;
      for (const auto& s : samples) var += (s.advantage - mean) * (s.advantage - mean);
      double sd = std::sqrt(var / static_cast<double>(samples.size()));
      for (auto& s : samples) s.advantage = (s.advantage - mean) / (sd + 1e-8);
    }

    for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
      PolicyGradient grad;
      for (const auto& s : samples) {
        double lp = log_prob(policy, env, *s.state, s.action, config.temperature);
        double ratio = std::exp(lp - s.old_log_prob);
        bool active = s.advantage >= 0.0 ? ratio < 1.0 + config.clip_ratio
                                         : ratio > 1.0 - config.clip_ratio;
        if (!active || s.advantage == 0.0) continue;
        accumulate_log_prob_gradient(policy, env, *s.state, s.action, config.temperature,
                                     s.advantage * ratio / static_cast<double>(samples.size()), grad);
      }
      anchored_step(policy, reference, grad, config.learning_rate, config.kl_coeff);
    }
    if (!finite_policy(policy)) {
      throw Error(ErrorKind::Divergence, fmt::format("ppo update {} produced non-finite logits", it));
    }

    // Critic: one averaged step toward the lambda-returns.
    std::unordered_map<std::uint64_t, std::pair<double, int>> acc;
    for (const auto& [key, target] : value_targets) {
      auto& a = acc[key];
      a.first += target;
      a.second += 1;
    }
    for (const auto& [key, a] : acc) {
      double& v = critic[key];
      v += config.critic_learning_rate * (a.first / a.second - v);
    }

    RlReport report;
    report.iteration = it;
    report.mean_task_score = greedy_score(policy, env, eval, seed);
    report.mean_rm_reward = reward_sum / static_cast<double>(batch.size());
    report.kl_to_reference = step_count > 0 ? kl_sum / static_cast<double>(step_count) : 0.0;
    result.reports.push_back(report);
    if (on_iteration) on_iteration(report, policy);
  }
  result.policy = std::move(policy);
  return result;
}

}  // namespace agentprm
