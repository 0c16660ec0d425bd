#include "agentprm/craftdag.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {
namespace {

constexpr std::array<std::string_view, CraftDag::kNumItems> kItemNames = {
    "log",   "cobblestone", "iron_ingot", "string",         "planks",        "stick",      "torch",
    "furnace", "bow",       "wooden_pickaxe", "stone_pickaxe", "iron_sword", "bucket", "lantern"};

const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> book = {
      {4, {{0, 1}}},           // planks
      {5, {{4, 1}}},           // stick
      {6, {{5, 1}, {1, 1}}},   // torch
      {7, {{1, 2}}},           // furnace
      {8, {{5, 2}, {3, 1}}},   // bow
      {9, {{4, 1}, {5, 1}}},   // wooden_pickaxe
      {10, {{1, 1}, {5, 1}}},  // stone_pickaxe
      {11, {{2, 1}, {5, 1}}},  // iron_sword
      {12, {{2, 2}}},          // bucket
      {13, {{6, 1}, {2, 1}}},  // lantern
  };
  return book;
}

constexpr int kFirstTarget = CraftDag::kNumBase;
constexpr int kNumTargets = CraftDag::kNumItems - CraftDag::kNumBase;

void obtain(int item, std::vector<int>& inv, std::vector<int>& out, int depth) {
  if (depth > 16) throw Error(ErrorKind::Internal, "recipe graph is not acyclic");
  if (item < CraftDag::kNumBase) {
    out.push_back(item);
    ++inv[static_cast<std::size_t>(item)];
    return;
  }
  const Recipe* r = CraftDag::recipe(item);
  for (auto [ing, count] : r->ingredients) {
    while (inv[static_cast<std::size_t>(ing)] < count) obtain(ing, inv, out, depth + 1);
  }
  for (auto [ing, count] : r->ingredients) inv[static_cast<std::size_t>(ing)] -= count;
  ++inv[static_cast<std::size_t>(item)];
  out.push_back(item);
}

}  // namespace

CraftDag::CraftDag(CraftDagConfig config) : config_(config) {
  if (config_.horizon < 1) throw Error(ErrorKind::Config, "craftdag horizon must be >= 1");
  if (config_.inventory_cap < 2) throw Error(ErrorKind::Config, "craftdag inventory_cap must be >= 2");
}

std::string_view CraftDag::item_name(int item) {
  if (item < 0 || item >= kNumItems) return "<invalid>";
  return kItemNames[static_cast<std::size_t>(item)];
}

int CraftDag::item_by_name(std::string_view name) {
  for (int i = 0; i < kNumItems; ++i) {
    if (kItemNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return -1;
}

const Recipe* CraftDag::recipe(int item) {
  for (const auto& r : recipes()) {
    if (r.item == item) return &r;
  }
  return nullptr;
}

std::string CraftDag::action_name(int action) const {
  if (action == kBeginAction.id) return "<begin>";
  if (action < 0 || action >= kNumItems) return "<invalid>";
  return fmt::format("{} {}", action < kNumBase ? "fetch" : "craft", item_name(action));
}

Task CraftDag::make_task(int target, const std::array<int, 6>& initial) const {
  return make_task(target, initial, config_.horizon);
}

Task CraftDag::make_task(int target, const std::array<int, 6>& initial, int horizon) const {
  Task t;
  t.horizon = horizon;
  t.params.push_back(target);
  std::string bits;
  std::string have;
  for (int i = 0; i < 6; ++i) {
    int c = initial[static_cast<std::size_t>(i)];
    t.params.push_back(c);
    bits += static_cast<char>('0' + std::clamp(c, 0, 9));
    if (c > 0) have += fmt::format("{}{}x{}", have.empty() ? "" : ", ", c, item_name(i));
  }
  t.id = fmt::format("craftdag-{}-{}", item_name(target), bits);
  t.instruction = fmt::format("craft {}", item_name(target));
  if (!have.empty()) t.instruction += fmt::format(" starting with {}", have);
  validate(t);
  return t;
}

Task CraftDag::parse_task(std::string_view id, int horizon) const {
  std::string s(id);
  auto fail = [&] { return Error(ErrorKind::Config, "unknown craftdag task id '" + s + "'"); };
  constexpr std::string_view prefix = "craftdag-";
  if (s.rfind(prefix, 0) != 0) throw fail();
  auto dash = s.rfind('-');
  if (dash == std::string::npos || dash < prefix.size()) throw fail();
  std::string name = s.substr(prefix.size(), dash - prefix.size());
  std::string bits = s.substr(dash + 1);
  int target = item_by_name(name);
  if (target < kFirstTarget || bits.size() != 6) throw fail();
  std::array<int, 6> init{};
  for (std::size_t i = 0; i < 6; ++i) {
    if (bits[i] < '0' || bits[i] > '9') throw fail();
    init[i] = bits[i] - '0';
  }
  return make_task(target, init, horizon);
}

void CraftDag::validate(const Task& task) const {
  const auto& p = task.params;
  if (p.size() != 7 || task.id.rfind("craftdag-", 0) != 0) {
    throw Error(ErrorKind::Config, "task '" + task.id + "' is not a craftdag task");
  }
  if (p[0] < kFirstTarget || p[0] >= kNumItems) {
    throw Error(ErrorKind::Config, "craftdag task '" + task.id + "' has an invalid target");
  }
  for (int i = 1; i < 7; ++i) {
    if (p[static_cast<std::size_t>(i)] < 0 || p[static_cast<std::size_t>(i)] > config_.inventory_cap) {
      throw Error(ErrorKind::Config, "craftdag task '" + task.id + "' has an invalid inventory");
    }
  }
  if (p[0] < 6 && p[static_cast<std::size_t>(p[0]) + 1] > 0) {
    throw Error(ErrorKind::Config, "craftdag task '" + task.id + "' starts already solved");
  }
}

std::vector<int> CraftDag::initial_internal(const Task& task) const {
  std::vector<int> inv(kNumItems, 0);
  for (int i = 0; i < 6; ++i) inv[static_cast<std::size_t>(i)] = task.params[static_cast<std::size_t>(i) + 1];
  return inv;
}

std::string CraftDag::describe(const std::vector<int>& inventory, std::string_view event) const {
  std::string out = "inventory:";
  bool any = false;
  for (int i = 0; i < kNumItems; ++i) {
    int c = inventory[static_cast<std::size_t>(i)];
    if (c > 0) {
      out += fmt::format(" {}={}", item_name(i), c);
      any = true;
    }
  }
  if (!any) out += " empty";
  out += " | ";
  out += event;
  return out;
}

std::string CraftDag::initial_observation(const Task&, const std::vector<int>& internal) const {
  return describe(internal, "start");
}

bool CraftDag::legal(const Task&, const std::vector<int>&, int action) const {
  return action >= 0 && action < kNumItems;
}

CraftDag::Transition CraftDag::transition(const Task& task, const std::vector<int>& internal,
                                          int action) const {
  Transition tr;
  tr.internal = internal;
  auto& inv = tr.internal;
  auto slot = static_cast<std::size_t>(action);
  if (inv[slot] >= config_.inventory_cap) {
    tr.observation = describe(inv, fmt::format("inventory full of {}", item_name(action)));
    return tr;
  }
  if (action < kNumBase) {
    ++inv[slot];
    tr.observation = describe(inv, fmt::format("got {}", item_name(action)));
  } else {
    const Recipe* r = recipe(action);
    bool ok = std::all_of(r->ingredients.begin(), r->ingredients.end(), [&](auto ing) {
      return inv[static_cast<std::size_t>(ing.first)] >= ing.second;
    });
    if (!ok) {
      tr.observation = describe(inv, fmt::format("cannot craft {}", item_name(action)));
      return tr;
    }
    for (auto [ing, count] : r->ingredients) inv[static_cast<std::size_t>(ing)] -= count;
    ++inv[slot];
    tr.observation = describe(inv, fmt::format("crafted {}", item_name(action)));
  }
  tr.goal_reached = inv[static_cast<std::size_t>(task.params[0])] > 0;
  return tr;
}

std::vector<int> CraftDag::plan(int target, std::vector<int> inventory) {
  std::vector<int> out;
  if (inventory[static_cast<std::size_t>(target)] > 0) return out;
  obtain(target, inventory, out, 0);
  return out;
}

std::uint64_t CraftDag::policy_key(const EnvState& state) const {
  std::vector<int> k;
  k.reserve(kNumItems + 1);
  k.push_back(state.task->params[0]);
  for (int c : state.internal) k.push_back(std::min(c, 2));
  return hash_ints(0x6372616674ULL, k);
}

std::uint64_t CraftDag::model_key(const EnvState& state) const {
  std::vector<int> k;
  k.reserve(kNumItems + 2);
  k.push_back(state.task->params[0]);
  for (int c : state.internal) k.push_back(c);
  k.push_back(state.task->horizon - state.step_index);
  return hash_ints(0x6d6f64656cULL, k);
}

std::size_t CraftDag::state_feature_dim() const { return kNumTargets + kNumItems + 3; }

std::vector<double> CraftDag::state_features(const EnvState& state) const {
  std::vector<double> f(state_feature_dim(), 0.0);
  int target = state.task->params[0];
  f[static_cast<std::size_t>(target - kFirstTarget)] = 1.0;
  for (int i = 0; i < kNumItems; ++i) {
    f[static_cast<std::size_t>(kNumTargets + i)] =
        static_cast<double>(state.internal[static_cast<std::size_t>(i)]) / config_.inventory_cap;
  }
  double horizon = state.task->horizon;
  int remaining = state.task->horizon - state.step_index;
  auto needed = static_cast<int>(plan(target, state.internal).size());
  f[kNumTargets + kNumItems] = needed / horizon;
  f[kNumTargets + kNumItems + 1] = remaining / horizon;
  f[kNumTargets + kNumItems + 2] = (remaining - needed) / horizon;
  return f;
}

Action CraftDag::expert_action(const EnvState& state) const {
  auto p = plan(state.task->params[0], state.internal);
  if (p.empty()) return Action{0};
  return Action{p.front()};
}

std::vector<Task> CraftDag::generate_tasks(std::size_t count, std::uint64_t seed) const {
  std::vector<Task> all;
  for (int target = kFirstTarget; target < kNumItems; ++target) {
    for (int mask = 0; mask < 64; ++mask) {
      std::array<int, 6> init{};
      for (int i = 0; i < 6; ++i) init[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      if (target < 6 && init[static_cast<std::size_t>(target)] > 0) continue;
      all.push_back(make_task(target, init));
    }
  }
  Rng rng(derive_seed(seed, 0x7461736bULL));
  rng.shuffle(all);
  if (all.size() > count) all.resize(count);
  return all;
}

}  // namespace agentprm
