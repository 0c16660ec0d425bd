#pragma once

#include <array>
#include <optional>

#include "agentprm/env.hpp"

namespace agentprm {

struct GridNavConfig {
  int width = 5;
  int height = 5;
  int horizon = 20;
  /// Fraction of generated tasks whose goal is a locked door needing a key.
  double key_fraction = 0.0;
  /// Distance-based partial credit at timeout instead of a binary reward.
  bool graded_reward = false;
  /// Generated keys lie on the far side of the start from the goal, so no
  /// first move toward the key also approaches the goal.
  bool detour_keys = false;
};

struct Cell {
  int x = 0;
  int y = 0;

  bool operator==(const Cell&) const = default;
};

/// Grid navigation. Coordinates grow rightwards (x) and upwards (y). With a
/// key, the goal cell is a locked door until the key cell has been visited.
///
/// Task params: {start.x, start.y, goal.x, goal.y, key.x, key.y}; a key
/// coordinate of -1 means no key. Internal state: {x, y, holding_key}.
class GridNav final : public Environment {
 public:
  enum Move : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

  explicit GridNav(GridNavConfig config = {});

  const GridNavConfig& config() const { return config_; }

  std::string family() const override { return "gridnav"; }
  int num_actions() const override { return 5; }
  std::string action_name(int action) const override;
  Task parse_task(std::string_view id, int horizon) const override;

  Task make_task(Cell start, Cell goal, std::optional<Cell> key = std::nullopt) const;
  Task make_task(Cell start, Cell goal, std::optional<Cell> key, int horizon) const;

  std::uint64_t policy_key(const EnvState& state) const override;
  std::uint64_t model_key(const EnvState& state) const override;
  std::vector<double> state_features(const EnvState& state) const override;
  std::size_t state_feature_dim() const override { return 15; }
  Action expert_action(const EnvState& state) const override;
  std::vector<Task> generate_tasks(std::size_t count, std::uint64_t seed) const override;

  static Cell position(const EnvState& state);
  static bool holding_key(const EnvState& state);
  static Cell goal_of(const Task& task);
  static std::optional<Cell> key_of(const Task& task);
  /// True while the task has a key that has not been picked up yet.
  static bool key_pending(const EnvState& state);

  /// No move from `start` that approaches `key` also approaches `goal`.
  static bool is_detour(Cell start, Cell goal, Cell key);

  /// Legal moves that strictly reduce the Manhattan distance to `target`,
  /// in action-index order.
  std::vector<Action> moves_toward(const EnvState& state, Cell target) const;

 protected:
  void validate(const Task& task) const override;
  std::vector<int> initial_internal(const Task& task) const override;
  std::string initial_observation(const Task& task,
                                  const std::vector<int>& internal) const override;
  bool legal(const Task& task, const std::vector<int>& internal, int action) const override;
  Transition transition(const Task& task, const std::vector<int>& internal,
                        int action) const override;
  std::string noop_observation(const Task& task, const std::vector<int>& internal) const override;
  double timeout_reward(const Task& task, const std::vector<int>& internal) const override;

 private:
  std::string describe(const Task& task, const std::vector<int>& internal,
                       std::string_view event) const;
  bool inside(Cell c) const;

  GridNavConfig config_;
};

}  // namespace agentprm
