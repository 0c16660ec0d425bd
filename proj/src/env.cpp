#include "agentprm/env.hpp"

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

bool EnvState::operator==(const EnvState& other) const {
  bool same_task = (task == other.task) || (task && other.task && *task == *other.task);
  return same_task && observations == other.observations && actions == other.actions &&
         internal == other.internal && step_index == other.step_index &&
         terminal == other.terminal && outcome == other.outcome;
}

EnvState Environment::reset(const Task& task, std::uint64_t /*seed*/) const {
  if (task.horizon < 1) {
    throw Error(ErrorKind::Config, "task '" + task.id + "' has horizon < 1");
  }
  validate(task);
  EnvState s;
  s.task = std::make_shared<const Task>(task);
  s.internal = initial_internal(task);
  s.observations.push_back(initial_observation(task, s.internal));
  return s;
}

bool Environment::is_legal(const EnvState& state, Action action) const {
  if (state.terminal) return false;
  if (action.id < 0 || action.id >= num_actions()) return false;
  return legal(*state.task, state.internal, action.id);
}

std::vector<Action> Environment::legal_actions(const EnvState& state) const {
  std::vector<Action> out;
  if (state.terminal) return out;
  for (int a = 0; a < num_actions(); ++a) {
    if (legal(*state.task, state.internal, a)) out.push_back(Action{a});
  }
  return out;
}

StepResult Environment::step(const EnvState& state, Action action) const {
  if (state.terminal) {
    throw Error(ErrorKind::Protocol, "step called on a terminal state");
  }
  if (!is_legal(state, action)) {
    throw Error(ErrorKind::IllegalAction,
                "action " + std::to_string(action.id) + " is illegal in the current state");
  }
  return advance(state, action.id, transition(*state.task, state.internal, action.id));
}

StepResult Environment::step_lenient(const EnvState& state, Action action) const {
  if (state.terminal) {
    throw Error(ErrorKind::Protocol, "step called on a terminal state");
  }
  if (!is_legal(state, action)) {
    Transition noop{state.internal, noop_observation(*state.task, state.internal), false};
    return advance(state, action.id, std::move(noop));
  }
  return advance(state, action.id, transition(*state.task, state.internal, action.id));
}

StepResult Environment::advance(const EnvState& state, int action, Transition next) const {
  StepResult r;
  r.state = state;
  r.state.actions.push_back(action);
  r.state.observations.push_back(next.observation);
  r.state.internal = std::move(next.internal);
  r.state.step_index = state.step_index + 1;
  if (next.goal_reached) {
    r.state.terminal = true;
    r.state.outcome = 1.0;
  } else if (r.state.step_index >= state.task->horizon) {
    r.state.terminal = true;
    r.state.outcome = timeout_reward(*state.task, r.state.internal);
  }
  r.observation = Observation{std::move(next.observation)};
  r.terminal = r.state.terminal;
  r.reward = OutcomeReward{r.state.terminal ? r.state.outcome : 0.0};
  return r;
}

std::uint64_t Environment::oracle_key(const EnvState& state) const {
  std::uint64_t h = hash_ints(hash_string(state.task->id), state.internal);
  return combine(combine(h, static_cast<std::uint64_t>(state.step_index)),
                 state.terminal ? 1u : 0u);
}

std::string Environment::noop_observation(const Task&, const std::vector<int>&) const {
  return "nothing happens";
}

double Environment::timeout_reward(const Task&, const std::vector<int>&) const { return 0.0; }

}  // namespace agentprm
