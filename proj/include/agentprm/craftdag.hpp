#pragma once

#include <array>
#include <string_view>
#include <utility>

#include "agentprm/env.hpp"

namespace agentprm {

struct CraftDagConfig {
  int horizon = 20;
  /// Per-item inventory cap; fetching or crafting beyond it fails observably.
  int inventory_cap = 4;
};

struct Recipe {
  int item = 0;
  std::vector<std::pair<int, int>> ingredients;  // (item, count)
};

/// Crafting over a fixed recipe DAG. Items 0..3 are base items obtained with
/// "fetch"; the remaining items are crafted from ingredients that the craft
/// consumes. Action ids coincide with item ids: fetch for base items, craft
/// otherwise. A craft with missing ingredients is observable, not fatal.
///
/// Task params: {target, initial count of items 0..5}. Internal state: the
/// inventory counts.
class CraftDag final : public Environment {
 public:
  static constexpr int kNumBase = 4;
  static constexpr int kNumItems = 14;

  explicit CraftDag(CraftDagConfig config = {});

  const CraftDagConfig& config() const { return config_; }

  std::string family() const override { return "craftdag"; }
  int num_actions() const override { return kNumItems; }
  std::string action_name(int action) const override;
  Task parse_task(std::string_view id, int horizon) const override;

  Task make_task(int target, const std::array<int, 6>& initial) const;
  Task make_task(int target, const std::array<int, 6>& initial, int horizon) const;

  static std::string_view item_name(int item);
  static int item_by_name(std::string_view name);
  static const Recipe* recipe(int item);

  /// Action sequence the scripted expert would take from `inventory`.
  static std::vector<int> plan(int target, std::vector<int> inventory);

  std::uint64_t policy_key(const EnvState& state) const override;
  std::uint64_t model_key(const EnvState& state) const override;
  std::vector<double> state_features(const EnvState& state) const override;
  std::size_t state_feature_dim() const override;
  Action expert_action(const EnvState& state) const override;
  std::vector<Task> generate_tasks(std::size_t count, std::uint64_t seed) const override;

 protected:
  void validate(const Task& task) const override;
  std::vector<int> initial_internal(const Task& task) const override;
  std::string initial_observation(const Task& task,
                                  const std::vector<int>& internal) const override;
  bool legal(const Task& task, const std::vector<int>& internal, int action) const override;
  Transition transition(const Task& task, const std::vector<int>& internal,
                        int action) const override;

 private:
  std::string describe(const std::vector<int>& inventory, std::string_view event) const;

  CraftDagConfig config_;
};

}  // namespace agentprm
