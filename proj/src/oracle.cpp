#include "agentprm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "agentprm/error.hpp"

namespace agentprm {

class QSolver {
 public:
  QSolver(const Environment& env, const Policy* policy, const OracleOptions& options, QTable& out)
      : env_(env), policy_(policy), options_(options), out_(out) {}

  double solve(const EnvState& state) {
    std::uint64_t key = env_.oracle_key(state);
    if (auto it = out_.values_.find(key); it != out_.values_.end()) return it->second;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> row(static_cast<std::size_t>(env_.num_actions()), nan);
    for (Action a : env_.legal_actions(state)) {
      auto next = env_.step(state, a);
      row[static_cast<std::size_t>(a.id)] = next.terminal ? next.state.outcome : solve(next.state);
    }

    double v = 0.0;
    if (policy_ != nullptr) {
      auto dist = action_distribution(*policy_, env_, state);
      for (std::size_t i = 0; i < dist.actions.size(); ++i) {
        if (dist.probs[i] > 0.0) v += dist.probs[i] * row[static_cast<std::size_t>(dist.actions[i].id)];
      }
    } else {
      v = -std::numeric_limits<double>::infinity();
      for (double q : row) {
        if (!std::isnan(q)) v = std::max(v, q);
      }
    }
    out_.rows_.emplace(key, std::move(row));
    out_.values_.emplace(key, v);
    if (out_.rows_.size() > options_.max_states) {
      throw Error(ErrorKind::OracleUnavailable,
                  "state space exceeds the oracle cap of " + std::to_string(options_.max_states));
    }
    return v;
  }

 private:
  const Environment& env_;
  const Policy* policy_;
  const OracleOptions& options_;
  QTable& out_;
};

double QTable::at(const Environment& env, const EnvState& state, Action action) const {
  auto it = rows_.find(env.oracle_key(state));
  if (it == rows_.end()) throw Error(ErrorKind::Data, "state not covered by the oracle table");
  if (action.id < 0 || static_cast<std::size_t>(action.id) >= it->second.size() ||
      std::isnan(it->second[static_cast<std::size_t>(action.id)])) {
    throw Error(ErrorKind::IllegalAction, "oracle has no value for an illegal action");
  }
  return it->second[static_cast<std::size_t>(action.id)];
}

bool QTable::contains(const Environment& env, const EnvState& state) const {
  return rows_.count(env.oracle_key(state)) > 0;
}

double QTable::value(const Environment& env, const EnvState& state) const {
  auto it = values_.find(env.oracle_key(state));
  if (it == values_.end()) throw Error(ErrorKind::Data, "state not covered by the oracle table");
  return it->second;
}

void QTable::merge(const QTable& other) {
  rows_.insert(other.rows_.begin(), other.rows_.end());
  values_.insert(other.values_.begin(), other.values_.end());
}

QTable exact_q(const Environment& env, const Policy& policy, std::span<const Task> tasks,
               const OracleOptions& options) {
  QTable table;
  QSolver solver(env, &policy, options, table);
  for (const auto& task : tasks) solver.solve(env.reset(task, 0));
  return table;
}

QTable exact_q_optimal(const Environment& env, std::span<const Task> tasks,
                       const OracleOptions& options) {
  QTable table;
  QSolver solver(env, nullptr, options, table);
  for (const auto& task : tasks) solver.solve(env.reset(task, 0));
  return table;
}

}  // namespace agentprm
