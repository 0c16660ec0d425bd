#include "agentprm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "agentprm/error.hpp"

namespace agentprm {

Policy Policy::tabular(int num_actions, double temperature) {
  Policy p;
  p.mode = PolicyMode::Tabular;
  p.num_actions = num_actions;
  p.temperature = temperature;
  return p;
}

Policy Policy::linear(int num_actions, std::size_t feature_dim, double temperature) {
  Policy p;
  p.mode = PolicyMode::Linear;
  p.num_actions = num_actions;
  p.temperature = temperature;
  p.feature_dim = feature_dim;
  p.weights.assign(static_cast<std::size_t>(num_actions) * (feature_dim + 1), 0.0);
  return p;
}

std::vector<double> Policy::logits(const Environment& env, const EnvState& state) const {
  if (num_actions != env.num_actions()) {
    throw Error(ErrorKind::Config, "policy action count does not match the environment");
  }
  std::vector<double> out(static_cast<std::size_t>(num_actions), 0.0);
  if (mode == PolicyMode::Tabular) {
    auto it = table.find(env.policy_key(state));
    if (it != table.end()) out = it->second;
    return out;
  }
  auto f = env.state_features(state);
  if (f.size() != feature_dim) {
    throw Error(ErrorKind::Config, "policy feature dimension does not match the environment");
  }
  std::size_t stride = feature_dim + 1;
  for (std::size_t a = 0; a < out.size(); ++a) {
    const double* w = weights.data() + a * stride;
    double z = w[feature_dim];
    for (std::size_t i = 0; i < feature_dim; ++i) z += w[i] * f[i];
    out[a] = z;
  }
  return out;
}

ActionDistribution action_distribution(const Policy& policy, const Environment& env,
                                       const EnvState& state) {
  return action_distribution(policy, env, state, policy.temperature);
}

ActionDistribution action_distribution(const Policy& policy, const Environment& env,
                                       const EnvState& state, double temperature) {
  if (state.terminal) {
    throw Error(ErrorKind::Protocol, "action distribution requested for a terminal state");
  }
  if (temperature < 0.0) throw Error(ErrorKind::Config, "temperature must be non-negative");
  ActionDistribution d;
  d.actions = env.legal_actions(state);
  if (d.actions.empty()) throw Error(ErrorKind::Internal, "non-terminal state without legal actions");
  auto logits = policy.logits(env, state);
  d.probs.assign(d.actions.size(), 0.0);
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.actions.size(); ++i) {
      if (logits[static_cast<std::size_t>(d.actions[i].id)] >
          logits[static_cast<std::size_t>(d.actions[best].id)]) {
        best = i;
      }
    }
    d.probs[best] = 1.0;
    return d;
  }
  double top = -std::numeric_limits<double>::infinity();
  for (auto a : d.actions) top = std::max(top, logits[static_cast<std::size_t>(a.id)]);
  double total = 0.0;
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    d.probs[i] = std::exp((logits[static_cast<std::size_t>(d.actions[i].id)] - top) / temperature);
    total += d.probs[i];
  }
  for (auto& p : d.probs) p /= total;
  return d;
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.actions.size(); ++i) {
    acc += dist.probs[i];
    if (u < acc && dist.probs[i] > 0.0) return dist.actions[i];
  }
  // Rounding left u above the accumulated mass: take the last supported action.
  for (std::size_t i = dist.actions.size(); i-- > 0;) {
    if (dist.probs[i] > 0.0) return dist.actions[i];
  }
  return dist.actions.front();
}

std::vector<int> Trajectory::action_ids() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action.id);
  return out;
}

Trajectory continue_rollout(const Policy& policy, const Environment& env, const EnvState& start,
                            double temperature, Rng& rng) {
  Trajectory t;
  t.task = *start.task;
  EnvState s = start;
  while (!s.terminal) {
    auto dist = action_distribution(policy, env, s, temperature);
    Action a = sample_action(dist, rng);
    auto r = env.step_lenient(s, a);
    t.steps.push_back(TrajectoryStep{std::move(s), a, r.observation});
    s = std::move(r.state);
  }
  t.outcome = s.outcome;
  t.final_state = std::move(s);
  return t;
}

Trajectory rollout(const Policy& policy, const Environment& env, const Task& task,
                   std::uint64_t seed) {
  return rollout(policy, env, task, seed, policy.temperature);
}

Trajectory rollout(const Policy& policy, const Environment& env, const Task& task,
                   std::uint64_t seed, double temperature) {
  Rng rng(seed);
  auto t = continue_rollout(policy, env, env.reset(task, seed), temperature, rng);
  t.seed = seed;
  return t;
}

std::uint64_t replicate_seed(std::uint64_t seed, const Task& task, int replicate) {
  return derive_seed(seed, hash_string(task.id), static_cast<std::uint64_t>(replicate));
}

std::vector<Trajectory> rollout_batch(const Policy& policy, const Environment& env,
                                      std::span<const Task> tasks, int n_per_task,
                                      std::uint64_t seed) {
  if (n_per_task < 1) throw Error(ErrorKind::Config, "n_per_task must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(tasks.size() * static_cast<std::size_t>(n_per_task));
  for (const auto& task : tasks) {
    for (int r = 0; r < n_per_task; ++r) {
      out.push_back(rollout(policy, env, task, replicate_seed(seed, task, r)));
    }
  }
  return out;
}

double trajectory_log_prob(const Policy& policy, const Environment& env,
                           const Trajectory& trajectory) {
  double lp = 0.0;
  for (const auto& step : trajectory.steps) {
    auto d = action_distribution(policy, env, step.state);
    auto it = std::find(d.actions.begin(), d.actions.end(), step.action);
    if (it == d.actions.end()) return -std::numeric_limits<double>::infinity();
    lp += std::log(d.probs[static_cast<std::size_t>(it - d.actions.begin())]);
  }
  return lp;
}

Trajectory replay(const Environment& env, const Task& task, std::uint64_t seed,
                  std::span<const int> actions, std::span<const std::string> observations) {
  Trajectory t;
  t.task = task;
  t.seed = seed;
  EnvState s = env.reset(task, seed);
  if (!observations.empty() && observations.size() != actions.size() + 1) {
    throw Error(ErrorKind::Data, "trajectory '" + task.id + "' has mismatched observation count");
  }
  if (!observations.empty() && observations[0] != s.observations[0]) {
    throw Error(ErrorKind::Data, "trajectory '" + task.id + "' does not replay: initial observation");
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (s.terminal) {
      throw Error(ErrorKind::Data, "trajectory '" + task.id + "' continues past a terminal state");
    }
    auto r = env.step_lenient(s, Action{actions[i]});
    if (!observations.empty() && observations[i + 1] != r.observation.payload) {
      throw Error(ErrorKind::Data, "trajectory '" + task.id + "' does not replay at step " +
                                       std::to_string(i));
    }
    t.steps.push_back(TrajectoryStep{std::move(s), Action{actions[i]}, r.observation});
    s = std::move(r.state);
  }
  if (!s.terminal) {
    throw Error(ErrorKind::Data, "trajectory '" + task.id + "' does not end in a terminal state");
  }
  t.outcome = s.outcome;
  t.final_state = std::move(s);
  return t;
}

std::vector<Trajectory> expert_trajectories(const Environment& env, std::span<const Task> tasks,
                                            std::size_t count, std::uint64_t seed) {
  std::vector<Trajectory> out;
  if (tasks.empty()) return out;
  Rng rng(derive_seed(seed, 0x657870657274ULL));
  for (std::size_t i = 0; i < count; ++i) {
    const Task& task = tasks[rng.below(tasks.size())];
    Trajectory t;
    t.task = task;
    t.seed = seed;
    EnvState s = env.reset(task, seed);
    while (!s.terminal) {
      Action a = env.expert_action(s);
      auto r = env.step_lenient(s, a);
      t.steps.push_back(TrajectoryStep{std::move(s), a, r.observation});
      s = std::move(r.state);
    }
    t.outcome = s.outcome;
    t.final_state = std::move(s);
    out.push_back(std::move(t));
  }
  return out;
}

void accumulate_log_prob_gradient(const Policy& policy, const Environment& env,
                                  const EnvState& state, Action action, double temperature,
                                  double coeff, PolicyGradient& grad) {
  if (temperature <= 0.0) {
    throw Error(ErrorKind::Config, "log-probability gradient needs a positive temperature");
  }
  auto d = action_distribution(policy, env, state, temperature);
  // d log pi(a) / d logit_b = (1[a == b] - pi_b) / temperature over legal b.
  std::vector<double> dlogit(static_cast<std::size_t>(policy.num_actions), 0.0);
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    double indicator = d.actions[i] == action ? 1.0 : 0.0;
    dlogit[static_cast<std::size_t>(d.actions[i].id)] = coeff * (indicator - d.probs[i]) / temperature;
  }
  if (policy.mode == PolicyMode::Tabular) {
    auto& row = grad.table[env.policy_key(state)];
    if (row.empty()) row.assign(dlogit.size(), 0.0);
    for (std::size_t b = 0; b < dlogit.size(); ++b) row[b] += dlogit[b];
    return;
  }
  auto f = env.state_features(state);
  std::size_t stride = policy.feature_dim + 1;
  if (grad.weights.empty()) grad.weights.assign(policy.weights.size(), 0.0);
  for (std::size_t b = 0; b < dlogit.size(); ++b) {
    if (dlogit[b] == 0.0) continue;
    double* g = grad.weights.data() + b * stride;
    for (std::size_t i = 0; i < policy.feature_dim; ++i) g[i] += dlogit[b] * f[i];
    g[policy.feature_dim] += dlogit[b];
  }
}

void apply_gradient(Policy& policy, const PolicyGradient& grad, double step) {
  if (policy.mode == PolicyMode::Tabular) {
    for (const auto& [key, g] : grad.table) {
      auto& row = policy.table[key];
      if (row.empty()) row.assign(g.size(), 0.0);
      for (std::size_t b = 0; b < g.size(); ++b) row[b] += step * g[b];
    }
    return;
  }
  for (std::size_t i = 0; i < grad.weights.size(); ++i) policy.weights[i] += step * grad.weights[i];
}

void behavior_clone(Policy& policy, const Environment& env,
                    std::span<const Trajectory> demonstrations,
                    const BehaviorCloningConfig& config) {
  double temperature = policy.temperature > 0.0 ? policy.temperature : 1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& demo : demonstrations) {
      for (const auto& step : demo.steps) {
        PolicyGradient g;
        accumulate_log_prob_gradient(policy, env, step.state, step.action, temperature, 1.0, g);
        apply_gradient(policy, g, config.learning_rate);
      }
    }
  }
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace agentprm
