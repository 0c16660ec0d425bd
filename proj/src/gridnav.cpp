#include "agentprm/gridnav.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {
namespace {

constexpr std::array<std::string_view, 5> kMoveNames = {"up", "down", "left", "right", "stay"};
constexpr std::array<int, 5> kDx = {0, 0, -1, 1, 0};
constexpr std::array<int, 5> kDy = {1, -1, 0, 0, 0};

int sign(int v) { return (v > 0) - (v < 0); }

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

}  // namespace

GridNav::GridNav(GridNavConfig config) : config_(config) {
  if (config_.width < 1 || config_.height < 1 || config_.width * config_.height < 2) {
    throw Error(ErrorKind::Config, "gridnav needs at least two cells");
  }
  if (config_.horizon < 1) throw Error(ErrorKind::Config, "gridnav horizon must be >= 1");
  if (config_.key_fraction < 0.0 || config_.key_fraction > 1.0) {
    throw Error(ErrorKind::Config, "gridnav key_fraction must lie in [0, 1]");
  }
}

std::string GridNav::action_name(int action) const {
  if (action == kBeginAction.id) return "<begin>";
  if (action < 0 || action >= num_actions()) return "<invalid>";
  return std::string(kMoveNames[static_cast<std::size_t>(action)]);
}

Task GridNav::make_task(Cell start, Cell goal, std::optional<Cell> key) const {
  return make_task(start, goal, key, config_.horizon);
}

Task GridNav::make_task(Cell start, Cell goal, std::optional<Cell> key, int horizon) const {
  Task t;
  Cell k = key.value_or(Cell{-1, -1});
  t.params = {start.x, start.y, goal.x, goal.y, k.x, k.y};
  t.horizon = horizon;
  if (key) {
    t.id = fmt::format("gridnav-s{}.{}-g{}.{}-k{}.{}", start.x, start.y, goal.x, goal.y, k.x, k.y);
    t.instruction = fmt::format("pick up the key at ({},{}), then reach goal ({},{}) from ({},{})",
                                k.x, k.y, goal.x, goal.y, start.x, start.y);
  } else {
    t.id = fmt::format("gridnav-s{}.{}-g{}.{}", start.x, start.y, goal.x, goal.y);
    t.instruction =
        fmt::format("reach goal ({},{}) from ({},{})", goal.x, goal.y, start.x, start.y);
  }
  validate(t);
  return t;
}

Task GridNav::parse_task(std::string_view id, int horizon) const {
  int v[6] = {-1, -1, -1, -1, -1, -1};
  std::string s(id);
  char tail = 0;
  bool ok = false;
  if (std::sscanf(s.c_str(), "gridnav-s%d.%d-g%d.%d-k%d.%d%c", &v[0], &v[1], &v[2], &v[3], &v[4],
                  &v[5], &tail) == 6) {
    ok = true;
  } else if (std::sscanf(s.c_str(), "gridnav-s%d.%d-g%d.%d%c", &v[0], &v[1], &v[2], &v[3],
                         &tail) == 4) {
    v[4] = v[5] = -1;
    ok = true;
  }
  if (!ok) throw Error(ErrorKind::Config, "unknown gridnav task id '" + s + "'");
  std::optional<Cell> key;
  if (v[4] >= 0) key = Cell{v[4], v[5]};
  Task t = make_task(Cell{v[0], v[1]}, Cell{v[2], v[3]}, key, horizon);
  if (t.id != s) throw Error(ErrorKind::Config, "non-canonical gridnav task id '" + s + "'");
  return t;
}

bool GridNav::inside(Cell c) const {
  return c.x >= 0 && c.y >= 0 && c.x < config_.width && c.y < config_.height;
}

void GridNav::validate(const Task& task) const {
  const auto& p = task.params;
  if (p.size() != 6 || task.id.rfind("gridnav-", 0) != 0) {
    throw Error(ErrorKind::Config, "task '" + task.id + "' is not a gridnav task");
  }
  Cell start{p[0], p[1]};
  Cell goal{p[2], p[3]};
  if (!inside(start) || !inside(goal) || start == goal) {
    throw Error(ErrorKind::Config, "gridnav task '" + task.id + "' has invalid start/goal");
  }
  if (p[4] >= 0 || p[5] >= 0) {
    Cell key{p[4], p[5]};
    if (!inside(key) || key == goal || key == start) {
      throw Error(ErrorKind::Config, "gridnav task '" + task.id + "' has an invalid key cell");
    }
  }
}

Cell GridNav::position(const EnvState& state) { return Cell{state.internal[0], state.internal[1]}; }

bool GridNav::holding_key(const EnvState& state) { return state.internal[2] != 0; }

Cell GridNav::goal_of(const Task& task) { return Cell{task.params[2], task.params[3]}; }

std::optional<Cell> GridNav::key_of(const Task& task) {
  if (task.params[4] < 0) return std::nullopt;
  return Cell{task.params[4], task.params[5]};
}

bool GridNav::key_pending(const EnvState& state) {
  return key_of(*state.task).has_value() && !holding_key(state);
}

std::vector<int> GridNav::initial_internal(const Task& task) const {
  return {task.params[0], task.params[1], 0};
}

std::string GridNav::describe(const Task& task, const std::vector<int>& internal,
                              std::string_view event) const {
  Cell here{internal[0], internal[1]};
  Cell goal = goal_of(task);
  auto key = key_of(task);
  bool pending = key.has_value() && internal[2] == 0;
  std::string out;
  for (int m = 0; m < 4; ++m) {
    Cell c{here.x + kDx[m], here.y + kDy[m]};
    std::string_view what = "open";
    if (!inside(c)) {
      what = "wall";
    } else if (c == goal) {
      what = pending ? "door" : "goal";
    } else if (pending && c == *key) {
      what = "key";
    }
    out += fmt::format("{}={} ", kMoveNames[static_cast<std::size_t>(m)], what);
  }
  out += "| ";
  out += event;
  return out;
}

std::string GridNav::initial_observation(const Task& task,
                                         const std::vector<int>& internal) const {
  return describe(task, internal, "start");
}

std::string GridNav::noop_observation(const Task& task, const std::vector<int>& internal) const {
  return describe(task, internal, "nothing happens");
}

bool GridNav::legal(const Task&, const std::vector<int>& internal, int action) const {
  if (action < 0 || action >= num_actions()) return false;
  Cell c{internal[0] + kDx[static_cast<std::size_t>(action)],
         internal[1] + kDy[static_cast<std::size_t>(action)]};
  return inside(c);
}

GridNav::Transition GridNav::transition(const Task& task, const std::vector<int>& internal,
                                        int action) const {
  Transition tr;
  tr.internal = internal;
  if (action == Stay) {
    tr.observation = describe(task, tr.internal, "stayed");
    return tr;
  }
  Cell next{internal[0] + kDx[static_cast<std::size_t>(action)],
            internal[1] + kDy[static_cast<std::size_t>(action)]};
  Cell goal = goal_of(task);
  auto key = key_of(task);
  bool pending = key.has_value() && internal[2] == 0;
  if (next == goal) {
    if (pending) {
      tr.observation = describe(task, tr.internal, "door is locked");
      return tr;
    }
    tr.internal[0] = next.x;
    tr.internal[1] = next.y;
    tr.goal_reached = true;
    tr.observation = describe(task, tr.internal, "reached goal");
    return tr;
  }
  tr.internal[0] = next.x;
  tr.internal[1] = next.y;
  if (pending && next == *key) {
    tr.internal[2] = 1;
    tr.observation = describe(task, tr.internal, "picked up key");
    return tr;
  }
  tr.observation = describe(task, tr.internal, "moved");
  return tr;
}

double GridNav::timeout_reward(const Task& task, const std::vector<int>& internal) const {
  if (!config_.graded_reward) return 0.0;
  // Partial credit stays below 0.5 so it never reaches the default success threshold.
  int span = config_.width + config_.height - 2;
  double d = manhattan(Cell{internal[0], internal[1]}, goal_of(task));
  return 0.5 * std::max(0.0, 1.0 - d / std::max(span, 1));
}

std::uint64_t GridNav::policy_key(const EnvState& state) const {
  Cell here = position(state);
  Cell goal = goal_of(*state.task);
  auto key = key_of(*state.task);
  int key_state = !key ? 0 : (holding_key(state) ? 1 : 2);
  int kx = 0;
  int ky = 0;
  if (key_state == 2) {
    kx = sign(key->x - here.x);
    ky = sign(key->y - here.y);
  }
  return hash_ints(0x67726964ULL,
                   {sign(goal.x - here.x), sign(goal.y - here.y), key_state, kx, ky});
}

std::uint64_t GridNav::model_key(const EnvState& state) const {
  Cell here = position(state);
  Cell goal = goal_of(*state.task);
  auto key = key_of(*state.task);
  int key_state = !key ? 0 : (holding_key(state) ? 1 : 2);
  int kx = 0;
  int ky = 0;
  if (key_state == 2) {
    kx = key->x - here.x;
    ky = key->y - here.y;
  }
  int edges = (here.x == 0) | ((here.x == config_.width - 1) << 1) | ((here.y == 0) << 2) |
              ((here.y == config_.height - 1) << 3);
  return hash_ints(0x6d6f64656cULL, {goal.x - here.x, goal.y - here.y, key_state, kx, ky, edges,
                                     state.task->horizon - state.step_index});
}

std::vector<double> GridNav::state_features(const EnvState& state) const {
  Cell here = position(state);
  Cell goal = goal_of(*state.task);
  auto key = key_of(*state.task);
  bool pending = key_pending(state);
  double w = std::max(config_.width - 1, 1);
  double h = std::max(config_.height - 1, 1);
  double span = std::max(config_.width + config_.height - 2, 1);
  int path = pending ? manhattan(here, *key) + manhattan(*key, goal) : manhattan(here, goal);
  int remaining = state.task->horizon - state.step_index;
  double horizon = state.task->horizon;
  std::vector<double> f;
  f.reserve(state_feature_dim());
  f.push_back((goal.x - here.x) / w);
  f.push_back((goal.y - here.y) / h);
  f.push_back(manhattan(here, goal) / span);
  f.push_back(pending ? 1.0 : 0.0);
  f.push_back(pending ? (key->x - here.x) / w : 0.0);
  f.push_back(pending ? (key->y - here.y) / h : 0.0);
  f.push_back(pending ? manhattan(here, *key) / span : 0.0);
  f.push_back(holding_key(state) ? 1.0 : 0.0);
  f.push_back(here.x == 0 ? 1.0 : 0.0);
  f.push_back(here.x == config_.width - 1 ? 1.0 : 0.0);
  f.push_back(here.y == 0 ? 1.0 : 0.0);
  f.push_back(here.y == config_.height - 1 ? 1.0 : 0.0);
  f.push_back(path / (2.0 * span));
  f.push_back(remaining / horizon);
  f.push_back((remaining - path) / horizon);
  return f;
}

std::vector<Action> GridNav::moves_toward(const EnvState& state, Cell target) const {
  std::vector<Action> out;
  Cell here = position(state);
  int d = manhattan(here, target);
  for (int m = 0; m < 4; ++m) {
    Cell c{here.x + kDx[static_cast<std::size_t>(m)], here.y + kDy[static_cast<std::size_t>(m)]};
    if (inside(c) && manhattan(c, target) < d) out.push_back(Action{m});
  }
  return out;
}

Action GridNav::expert_action(const EnvState& state) const {
  Cell here = position(state);
  Cell goal = goal_of(*state.task);
  bool pending = key_pending(state);
  Cell target = pending ? *key_of(*state.task) : goal;
  auto blocked = [&](int m) {
    Cell c{here.x + kDx[static_cast<std::size_t>(m)], here.y + kDy[static_cast<std::size_t>(m)]};
    return !inside(c) || (pending && c == goal);
  };
  // Horizontal first, then vertical.
  int order[2];
  order[0] = target.x > here.x ? Right : (target.x < here.x ? Left : -1);
  order[1] = target.y > here.y ? Up : (target.y < here.y ? Down : -1);
  for (int m : order) {
    if (m >= 0 && !blocked(m)) return Action{m};
  }
  // The locked door sits between us and the key: sidestep around it.
  const int sidesteps[4] = {Up, Down, Right, Left};
  for (int m : sidesteps) {
    bool along_axis = (order[0] < 0) ? (m == Left || m == Right) : (m == Up || m == Down);
    if (along_axis && !blocked(m)) return Action{m};
  }
  for (int m : sidesteps) {
    if (!blocked(m)) return Action{m};
  }
  return Action{Stay};
}

bool GridNav::is_detour(Cell start, Cell goal, Cell key) {
  auto shared = [](int s, int g, int k) { return sign(k - s) != 0 && sign(k - s) == sign(g - s); };
  return !shared(start.x, goal.x, key.x) && !shared(start.y, goal.y, key.y);
}

std::vector<Task> GridNav::generate_tasks(std::size_t count, std::uint64_t seed) const {
  std::vector<Task> tasks;
  std::set<std::string> seen;
  Rng rng(derive_seed(seed, 0x7461736bULL));
  auto random_cell = [&] {
    return Cell{static_cast<int>(rng.below(static_cast<std::size_t>(config_.width))),
                static_cast<int>(rng.below(static_cast<std::size_t>(config_.height)))};
  };
  std::size_t cells = static_cast<std::size_t>(config_.width * config_.height);
  std::size_t limit = cells * (cells - 1) * (config_.key_fraction > 0.0 ? cells : 1);
  std::size_t attempts = 0;
  while (tasks.size() < count && attempts < 50 * count + 1000) {
    ++attempts;
    Cell start = random_cell();
    Cell goal = random_cell();
    if (start == goal) continue;
    std::optional<Cell> key;
    if (rng.uniform() < config_.key_fraction) {
      if (cells < 3) continue;
      Cell k = random_cell();
      if (k == start || k == goal) continue;
      if (config_.detour_keys && !is_detour(start, goal, k)) continue;
      key = k;
    }
    Task t = make_task(start, goal, key);
    if (seen.insert(t.id).second) tasks.push_back(std::move(t));
    if (seen.size() >= limit) break;
  }
  return tasks;
}

}  // namespace agentprm
