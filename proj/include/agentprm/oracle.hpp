#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/policy.hpp"

namespace agentprm {

struct OracleOptions {
  std::size_t max_states = 100000;
};

/// Q-values indexed by Environment::oracle_key. Rows hold one entry per action
/// id; illegal actions hold NaN.
class QTable {
 public:
  double at(const Environment& env, const EnvState& state, Action action) const;
  bool contains(const Environment& env, const EnvState& state) const;
  /// sum_a pi(a|s) Q(s, a) for an on-policy table, max_a Q(s, a) otherwise.
  double value(const Environment& env, const EnvState& state) const;
  std::size_t num_states() const { return rows_.size(); }

  void merge(const QTable& other);

 private:
  friend class QSolver;
  std::unordered_map<std::uint64_t, std::vector<double>> rows_;
  std::unordered_map<std::uint64_t, double> values_;
};

/// Q^pi(s, a) = E[r(u, tau) | s, a] by exhaustive backward induction over every
/// state reachable from reset(task). Throws OracleUnavailable past the cap.
QTable exact_q(const Environment& env, const Policy& policy, std::span<const Task> tasks,
               const OracleOptions& options = {});

/// Q*(s, a) under the best continuation (finite-horizon dynamic programming).
QTable exact_q_optimal(const Environment& env, std::span<const Task> tasks,
                       const OracleOptions& options = {});

}  // namespace agentprm
