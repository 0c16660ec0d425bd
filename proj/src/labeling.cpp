#include "agentprm/labeling.hpp"

#include <cmath>

#include "agentprm/error.hpp"

namespace agentprm {

std::string_view to_string(V0Mode m) {
  return m == V0Mode::Zero ? "zero" : "learned-begin-token";
}

V0Mode parse_v0_mode(std::string_view s) {
  if (s == "zero") return V0Mode::Zero;
  if (s == "learned-begin-token") return V0Mode::LearnedBeginToken;
  throw Error(ErrorKind::Config, "unknown v0 mode '" + std::string(s) + "'");
}

CostLedger& CostLedger::operator+=(const CostLedger& other) {
  env_steps += other.env_steps;
  rollouts += other.rollouts;
  labeled_steps += other.labeled_steps;
  return *this;
}

std::vector<Trajectory> collect_trajectories(const Policy& policy, const Environment& env,
                                             std::span<const Task> tasks, int n_per_task,
                                             std::uint64_t seed, CostLedger& ledger) {
  auto out = rollout_batch(policy, env, tasks, n_per_task, seed);
  for (const auto& t : out) ledger.record_rollout(t.length());
  return out;
}

std::vector<double> td_residuals(std::span<const double> q, double v0, double outcome,
                                 double gamma) {
  if (q.empty()) throw Error(ErrorKind::Data, "cannot label an empty trajectory");
  std::size_t last = q.size() - 1;
  std::vector<double> delta(q.size());
  for (std::size_t t = 0; t < last; ++t) {
    double prev = t == 0 ? v0 : q[t - 1];
    delta[t] = gamma * q[t] - prev;
  }
  delta[last] = outcome - (last == 0 ? v0 : q[last - 1]);
  return delta;
}

std::vector<double> gae_backward(std::span<const double> deltas, double decay) {
  std::vector<double> adv(deltas.size());
  double running = 0.0;
  for (std::size_t t = deltas.size(); t-- > 0;) {
    running = deltas[t] + decay * running;
    adv[t] = running;
  }
  return adv;
}

GaeTargets td_gae_targets(std::span<const double> q, double v0, double outcome,
                          const TdConfig& config) {
  GaeTargets g;
  auto delta = td_residuals(q, v0, outcome, config.gamma);
  g.advantages = gae_backward(delta, config.gamma * config.lambda);
  std::size_t last = q.size() - 1;
  g.q_targets.resize(q.size());
  g.adv_targets.resize(q.size());
  for (std::size_t t = 0; t < q.size(); ++t) {
    double prev = t == 0 ? v0 : q[t - 1];
    g.q_targets[t] = t == last ? outcome : g.advantages[t] + prev;
    // Stored as the difference so that Q-hat_t - q_{t-1} == A-hat_t holds exactly.
    g.adv_targets[t] = g.q_targets[t] - prev;
  }
  return g;
}

double begin_value(const RewardModel& model, const Environment& env, const Trajectory& trajectory,
                   const TdConfig& config) {
  if (config.v0_mode == V0Mode::Zero || trajectory.steps.empty()) return 0.0;
  return model.score(env, trajectory.steps.front().state, kBeginAction);
}

std::vector<LabeledStep> estimate_td_gae(const RewardModel& model, const Environment& env,
                                         std::span<const Trajectory> trajectories,
                                         const TdConfig& config, CostLedger& ledger) {
  std::vector<LabeledStep> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    if (traj.steps.empty()) throw Error(ErrorKind::Data, "cannot label an empty trajectory");
    std::vector<double> q;
    q.reserve(traj.steps.size());
    for (const auto& step : traj.steps) q.push_back(model.score(env, step.state, step.action));
    auto g = td_gae_targets(q, begin_value(model, env, traj, config), traj.outcome, config);
    for (std::size_t t = 0; t < q.size(); ++t) {
      out.push_back(LabeledStep{i, static_cast<int>(t), g.q_targets[t], g.adv_targets[t],
                                LabelSource::TdGae});
    }
    ledger.labeled_steps += q.size();
  }
  return out;
}

std::vector<LabeledStep> estimate_mc(const Policy& policy, const Environment& env,
                                     std::span<const Trajectory> trajectories, int n_mc,
                                     double success_threshold, CostLedger& ledger,
                                     std::uint64_t seed, McTrace* trace) {
  if (n_mc < 1) throw Error(ErrorKind::Config, "n_mc must be >= 1");
  std::vector<LabeledStep> out;
  if (trace != nullptr) trace->outcomes.assign(trajectories.size(), {});
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    if (traj.steps.empty()) throw Error(ErrorKind::Data, "cannot label an empty trajectory");
    if (!traj.final_state.terminal) {
      throw Error(ErrorKind::Data, "trajectory '" + traj.task.id + "' is not replayable");
    }
    if (trace != nullptr) trace->outcomes[i].resize(traj.steps.size());
    double previous = 0.0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const EnvState& next = t + 1 < traj.steps.size() ? traj.steps[t + 1].state : traj.final_state;
      double q = 0.0;
      if (next.terminal) {
        q = traj.outcome;
      } else {
        for (int j = 0; j < n_mc; ++j) {
          Rng rng(derive_seed(seed, i, t, static_cast<std::uint64_t>(j)));
          auto cont = continue_rollout(policy, env, next, policy.temperature, rng);
          ledger.record_rollout(cont.length());
          if (trace != nullptr) trace->outcomes[i][t].push_back(cont.outcome);
          if (cont.outcome >= success_threshold) q = 1.0;
        }
      }
      out.push_back(LabeledStep{i, static_cast<int>(t), q, q - previous, LabelSource::Mc});
      previous = q;
    }
    ledger.labeled_steps += traj.steps.size();
  }
  return out;
}

double cost_ratio(const CostLedger& mc, const CostLedger& td) {
  if (td.env_steps == 0) throw Error(ErrorKind::Data, "td ledger has no environment steps");
  return static_cast<double>(mc.env_steps) / static_cast<double>(td.env_steps);
}

}  // namespace agentprm
