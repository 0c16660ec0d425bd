#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/oracle.hpp"
#include "agentprm/policy.hpp"
#include "agentprm/reward_model.hpp"

namespace agentprm {

struct SearchConfig {
  int beam_n = 4;
  int expand_m = 4;
  /// 0 means the task horizon.
  int max_steps = 0;
  double sample_temperature = 0.7;
};

void validate(const SearchConfig& config);

struct ScoredTrajectory {
  Trajectory trajectory;
  double score = 0.0;
};

/// One candidate considered by beam search.
struct TraceNode {
  int iteration = 0;
  int id = 0;
  int parent = -1;  // -1 for children of the root
  int action = 0;
  double score = 0.0;
  bool terminal = false;
  bool retained = false;
};

struct SearchResult {
  Trajectory best;
  double best_score = 0.0;
  std::size_t best_index = 0;  // Best-of-N: sample index of `best`
  std::vector<ScoredTrajectory> all_terminal;
  std::uint64_t expansions = 0;  // environment steps consumed
  std::vector<TraceNode> trace;
};

using StepScorer = std::function<double(const EnvState& state, Action action)>;
using TrajectoryScorer = std::function<double(const Trajectory& trajectory)>;

StepScorer model_scorer(const RewardModel& model, const Environment& env);
/// Scores with an exact Q table (NaN entries, i.e. unknown states, score 0).
StepScorer oracle_scorer(const QTable& q, const Environment& env);

/// Final-step score of the model, the trajectory-level score for all variants.
double trajectory_score(const RewardModel& model, const Environment& env,
                        const Trajectory& trajectory);

/// Argmax with lowest-index tie-breaking.
std::size_t select_best(std::span<const double> scores);

/// Sample i is rollout(policy, task, bon_sample_seed(seed, task, i)), so the
/// first n of a larger draw are exactly the draw for n.
std::uint64_t bon_sample_seed(std::uint64_t seed, const Task& task, int index);
std::vector<Trajectory> bon_samples(const Policy& policy, const Environment& env, const Task& task,
                                    int n, std::uint64_t seed, double temperature);

/// Selects among the first `n` of `samples`.
SearchResult select_from(std::span<const Trajectory> samples, int n,
                         const TrajectoryScorer& scorer);

SearchResult best_of_n(const Policy& policy, const RewardModel& model, const Environment& env,
                       const Task& task, int n, std::uint64_t seed);
SearchResult best_of_n(const Policy& policy, const RewardModel& model, const Environment& env,
                       const Task& task, int n, std::uint64_t seed, double temperature);

/// Uniformly random pick among the first n samples.
std::size_t random_selection(int n, std::uint64_t seed, const Task& task);

/// Step-level beam search: expand M children of the root, then M children of
/// each of the N retained live beams per iteration. Terminal beams are carried
/// forward and keep competing for the top-N slots.
SearchResult beam_search(const Policy& policy, const StepScorer& scorer, const Environment& env,
                         const Task& task, const SearchConfig& config, std::uint64_t seed);
SearchResult beam_search(const Policy& policy, const RewardModel& model, const Environment& env,
                         const Task& task, const SearchConfig& config, std::uint64_t seed);

/// Greedy (temperature 0) decoding of the policy.
Trajectory greedy_decode(const Policy& policy, const Environment& env, const Task& task,
                         std::uint64_t seed);

/// Greedy execution of argmax_a Q(s, a).
Trajectory greedy_on_q(const QTable& q, const Environment& env, const Task& task,
                       std::uint64_t seed);

}  // namespace agentprm
