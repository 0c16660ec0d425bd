#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace agentprm {

/// A task instruction u together with its horizon. `params` is the decoded
/// form of `id`; every environment family can rebuild a Task from its id.
struct Task {
  std::string id;
  std::string instruction;
  int horizon = 1;
  std::vector<int> params;

  bool operator==(const Task&) const = default;
};

struct Observation {
  std::string payload;

  bool operator==(const Observation&) const = default;
};

struct Action {
  int id = 0;

  auto operator<=>(const Action&) const = default;
};

/// Pseudo-action used to score the state before the first action.
inline constexpr Action kBeginAction{-1};

struct OutcomeReward {
  double value = 0.0;
};

/// s_t: the instruction, the interaction history and the simulator's internal
/// state. `internal` is always a deterministic function of (task, actions).
struct EnvState {
  std::shared_ptr<const Task> task;
  std::vector<std::string> observations;  // o_0 .. o_t
  std::vector<int> actions;               // a_0 .. a_{t-1}
  std::vector<int> internal;
  int step_index = 0;
  bool terminal = false;
  double outcome = 0.0;

  const std::string& pending_observation() const { return observations.back(); }

  bool operator==(const EnvState& other) const;
};

struct StepResult {
  EnvState state;
  Observation observation;
  OutcomeReward reward;
  bool terminal = false;
};

/// Deterministic sparse-reward POMDP. Instances are immutable after
/// construction, so one environment can serve any number of concurrent
/// episodes.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string family() const = 0;
  virtual int num_actions() const = 0;
  virtual std::string action_name(int action) const = 0;

  /// Rebuilds a task from its id; malformed or unknown ids are config errors.
  virtual Task parse_task(std::string_view id, int horizon) const = 0;

  EnvState reset(const Task& task, std::uint64_t seed) const;

  /// Strict transition: rejects illegal actions and terminal states.
  StepResult step(const EnvState& state, Action action) const;

  /// Transition used by rollouts: illegal actions become a no-op that still
  /// consumes one step of budget.
  StepResult step_lenient(const EnvState& state, Action action) const;

  std::vector<Action> legal_actions(const EnvState& state) const;
  bool is_legal(const EnvState& state, Action action) const;

  /// Key over (task, internal state, step index). Exact oracles index by it.
  std::uint64_t oracle_key(const EnvState& state) const;

  /// Observation-level abstraction the tabular policy is keyed on.
  virtual std::uint64_t policy_key(const EnvState& state) const = 0;

  /// Task-relative state descriptor (including remaining steps) used by the
  /// tabular reward model. Injective over the states of a single task.
  virtual std::uint64_t model_key(const EnvState& state) const = 0;

  /// Dense task-relative features for function approximators.
  virtual std::vector<double> state_features(const EnvState& state) const = 0;
  virtual std::size_t state_feature_dim() const = 0;

  /// Scripted demonstrator used for behavior-cloning initialization.
  virtual Action expert_action(const EnvState& state) const = 0;

  /// `count` distinct tasks drawn deterministically from `seed`. Families with a
  /// smaller task space return every task they have.
  virtual std::vector<Task> generate_tasks(std::size_t count, std::uint64_t seed) const = 0;

 protected:
  struct Transition {
    std::vector<int> internal;
    std::string observation;
    bool goal_reached = false;
  };

  virtual void validate(const Task& task) const = 0;
  virtual std::vector<int> initial_internal(const Task& task) const = 0;
  virtual std::string initial_observation(const Task& task,
                                          const std::vector<int>& internal) const = 0;
  virtual bool legal(const Task& task, const std::vector<int>& internal,
                     int action) const = 0;
  virtual Transition transition(const Task& task, const std::vector<int>& internal,
                                int action) const = 0;
  /// Observation emitted when an illegal action is mapped to a no-op.
  virtual std::string noop_observation(const Task& task,
                                       const std::vector<int>& internal) const;
  /// Reward at the horizon when the goal was not reached (graded modes).
  virtual double timeout_reward(const Task& task, const std::vector<int>& internal) const;

 private:
  StepResult advance(const EnvState& state, int action, Transition next) const;
};

}  // namespace agentprm
