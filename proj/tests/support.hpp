#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm::testing {

/// Single-path chain: action 0 advances, action 1 falls into a sink that can
/// never reach the end. Reaching position `length` succeeds; horizon equals
/// the length, so every failure is terminal at the horizon.
class ChainEnv final : public Environment {
 public:
  std::string family() const override { return "chain"; }
  int num_actions() const override { return 2; }
  std::string action_name(int action) const override { return action == 0 ? "advance" : "fall"; }

  Task parse_task(std::string_view id, int horizon) const override {
    if (id.substr(0, 6) != "chain-") throw Error(ErrorKind::Config, "unknown chain task");
    return make(std::stoi(std::string(id.substr(6))), horizon);
  }

  Task make(int length, int horizon = 0) const {
    Task t;
    t.id = "chain-" + std::to_string(length);
    t.instruction = "reach the end";
    t.horizon = horizon > 0 ? horizon : length;
    t.params = {length};
    return t;
  }

  std::uint64_t policy_key(const EnvState& s) const override {
    return hash_ints(1, s.internal);
  }
  std::uint64_t model_key(const EnvState& s) const override {
    return combine(hash_ints(2, s.internal), static_cast<std::uint64_t>(s.step_index));
  }
  std::vector<double> state_features(const EnvState& s) const override {
    return {s.internal[0] / 8.0, static_cast<double>(s.internal[1])};
  }
  std::size_t state_feature_dim() const override { return 2; }
  Action expert_action(const EnvState&) const override { return Action{0}; }
  std::vector<Task> generate_tasks(std::size_t, std::uint64_t) const override { return {make(3)}; }

 protected:
  void validate(const Task& task) const override {
    if (task.params.size() != 1 || task.params[0] < 1) {
      throw Error(ErrorKind::Config, "bad chain task");
    }
  }
  std::vector<int> initial_internal(const Task&) const override { return {0, 0}; }
  std::string initial_observation(const Task&, const std::vector<int>&) const override {
    return "start";
  }
  bool legal(const Task&, const std::vector<int>&, int action) const override {
    return action == 0 || action == 1;
  }
  Transition transition(const Task& task, const std::vector<int>& in, int action) const override {
    Transition t;
    t.internal = in;
    if (action == 1) t.internal[1] = 1;
    if (action == 0 && !in[1]) ++t.internal[0];
    t.observation = t.internal[1] ? "sink" : "at " + std::to_string(t.internal[0]);
    t.goal_reached = t.internal[0] == task.params[0];
    return t;
  }
};

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("agentprm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A-hat_t as the explicit truncated sum over (gamma lambda)^k delta_{t+k}.
inline std::vector<double> gae_double_sum(const std::vector<double>& deltas, double decay) {
  std::vector<double> out(deltas.size(), 0.0);
  for (std::size_t t = 0; t < deltas.size(); ++t) {
    double weight = 1.0;
    for (std::size_t k = 0; t + k < deltas.size(); ++k) {
      out[t] += weight * deltas[t + k];
      weight *= decay;
    }
  }
  return out;
}

}  // namespace agentprm::testing
