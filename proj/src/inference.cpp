#include "agentprm/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

void validate(const SearchConfig& c) {
  if (c.beam_n < 1 || c.expand_m < 1) {
    throw Error(ErrorKind::Config,
                fmt::format("beam search needs N >= 1 and M >= 1, got {}x{}", c.beam_n, c.expand_m));
  }
  if (c.max_steps < 0) throw Error(ErrorKind::Config, "max_steps must be >= 0");
  if (!(c.sample_temperature >= 0.0)) {
    throw Error(ErrorKind::Config, "sample temperature must be >= 0");
  }
}

StepScorer model_scorer(const RewardModel& model, const Environment& env) {
  return [&model, &env](const EnvState& s, Action a) { return model.score(env, s, a); };
}

StepScorer oracle_scorer(const QTable& q, const Environment& env) {
  return [&q, &env](const EnvState& s, Action a) {
    if (!q.contains(env, s) || !env.is_legal(s, a)) return 0.0;
    return q.at(env, s, a);
  };
}

double trajectory_score(const RewardModel& model, const Environment& env,
                        const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw Error(ErrorKind::Data, "cannot score an empty trajectory");
  const auto& last = trajectory.steps.back();
  return model.score(env, last.state, last.action);
}

std::size_t select_best(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::Data, "nothing to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::uint64_t bon_sample_seed(std::uint64_t seed, const Task& task, int index) {
  return derive_seed(seed, 0x626f6eULL, hash_string(task.id), static_cast<std::uint64_t>(index));
}

std::vector<Trajectory> bon_samples(const Policy& policy, const Environment& env, const Task& task,
                                    int n, std::uint64_t seed, double temperature) {
  if (n < 1) throw Error(ErrorKind::Config, "Best-of-N needs n >= 1");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(rollout(policy, env, task, bon_sample_seed(seed, task, i), temperature));
  }
  return out;
}

SearchResult select_from(std::span<const Trajectory> samples, int n,
                         const TrajectoryScorer& scorer) {
  if (n < 1 || static_cast<std::size_t>(n) > samples.size()) {
    throw Error(ErrorKind::Config,
                fmt::format("cannot select among {} of {} samples", n, samples.size()));
  }
  SearchResult r;
  std::vector<double> scores;
  for (int i = 0; i < n; ++i) {
    const auto& t = samples[static_cast<std::size_t>(i)];
    scores.push_back(scorer(t));
    r.expansions += t.length();
    r.all_terminal.push_back(ScoredTrajectory{t, scores.back()});
  }
  r.best_index = select_best(scores);
  r.best = samples[r.best_index];
  r.best_score = scores[r.best_index];
  return r;
}

SearchResult best_of_n(const Policy& policy, const RewardModel& model, const Environment& env,
                       const Task& task, int n, std::uint64_t seed) {
  return best_of_n(policy, model, env, task, n, seed, policy.temperature);
}

SearchResult best_of_n(const Policy& policy, const RewardModel& model, const Environment& env,
                       const Task& task, int n, std::uint64_t seed, double temperature) {
  auto samples = bon_samples(policy, env, task, n, seed, temperature);
  return select_from(samples, n,
                     [&](const Trajectory& t) { return trajectory_score(model, env, t); });
}

std::size_t random_selection(int n, std::uint64_t seed, const Task& task) {
  if (n < 1) throw Error(ErrorKind::Config, "random selection needs n >= 1");
  Rng rng(derive_seed(seed, 0x72616e64ULL, hash_string(task.id), static_cast<std::uint64_t>(n)));
  return static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
}

namespace {

struct Beam {
  int id = 0;
  std::size_t trace_index = 0;
  std::vector<TrajectoryStep> steps;
  EnvState state;
  double score = 0.0;
};

Trajectory to_trajectory(const Task& task, std::uint64_t seed, const Beam& b) {
  Trajectory t;
  t.task = task;
  t.seed = seed;
  t.steps = b.steps;
  t.final_state = b.state;
  t.outcome = b.state.terminal ? b.state.outcome : 0.0;
  return t;
}

}  // namespace

SearchResult beam_search(const Policy& policy, const StepScorer& scorer, const Environment& env,
                         const Task& task, const SearchConfig& config, std::uint64_t seed) {
  validate(config);
  int max_steps = config.max_steps > 0 ? config.max_steps : task.horizon;
  Rng rng(seed);
  SearchResult result;
  int next_id = 0;

  auto expand = [&](const Beam& parent, int iteration, std::vector<Beam>& pool) {
    auto dist = action_distribution(policy, env, parent.state, config.sample_temperature);
    for (int j = 0; j < config.expand_m; ++j) {
      Action a = sample_action(dist, rng);
      auto r = env.step_lenient(parent.state, a);
      ++result.expansions;
      Beam child;
      child.id = next_id++;
      child.steps = parent.steps;
      child.score = scorer(parent.state, a);
      child.steps.push_back(TrajectoryStep{parent.state, a, r.observation});
      child.state = std::move(r.state);
      child.trace_index = result.trace.size();
      result.trace.push_back(TraceNode{iteration, child.id, parent.id, a.id, child.score,
                                       child.state.terminal, false});
      pool.push_back(std::move(child));
    }
  };

  auto retain = [&](std::vector<Beam>& pool) {
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Beam& a, const Beam& b) { return a.score > b.score; });
    if (pool.size() > static_cast<std::size_t>(config.beam_n)) {
      pool.resize(static_cast<std::size_t>(config.beam_n));
    }
    for (const auto& b : pool) result.trace[b.trace_index].retained = true;
  };

  Beam root;
  root.id = -1;
  root.state = env.reset(task, seed);
  if (root.state.terminal) throw Error(ErrorKind::Internal, "task is terminal at reset");
  std::vector<Beam> beams;
  expand(root, 0, beams);
  retain(beams);

  for (int iteration = 1; iteration < max_steps; ++iteration) {
    bool live = std::any_of(beams.begin(), beams.end(),
                            [](const Beam& b) { return !b.state.terminal; });
    if (!live) break;
    std::vector<Beam> pool;
    for (const auto& b : beams) {
      if (b.state.terminal) {
        pool.push_back(b);
      } else {
        expand(b, iteration, pool);
      }
    }
    if (pool.empty()) throw Error(ErrorKind::Internal, "beam search has no candidates");
    retain(pool);
    beams = std::move(pool);
  }

  for (const auto& b : beams) {
    if (b.state.terminal) {
      result.all_terminal.push_back(ScoredTrajectory{to_trajectory(task, seed, b), b.score});
    }
  }
  // beams are sorted by score, so the first terminal one is the top-1 path.
  const Beam* best = &beams.front();
  for (const auto& b : beams) {
    if (b.state.terminal) {
      best = &b;
      break;
    }
  }
  result.best = to_trajectory(task, seed, *best);
  result.best_score = best->score;
  return result;
}

SearchResult beam_search(const Policy& policy, const RewardModel& model, const Environment& env,
                         const Task& task, const SearchConfig& config, std::uint64_t seed) {
  return beam_search(policy, model_scorer(model, env), env, task, config, seed);
}

Trajectory greedy_decode(const Policy& policy, const Environment& env, const Task& task,
                         std::uint64_t seed) {
  return rollout(policy, env, task, seed, 0.0);
}

Trajectory greedy_on_q(const QTable& q, const Environment& env, const Task& task,
                       std::uint64_t seed) {
  Trajectory t;
  t.task = task;
  t.seed = seed;
  EnvState s = env.reset(task, seed);
  while (!s.terminal) {
    auto legal = env.legal_actions(s);
    Action best = legal.front();
    double best_q = q.at(env, s, best);
    for (std::size_t i = 1; i < legal.size(); ++i) {
      double v = q.at(env, s, legal[i]);
      if (v > best_q) {
        best_q = v;
        best = legal[i];
      }
    }
    auto r = env.step(s, best);
    t.steps.push_back(TrajectoryStep{std::move(s), best, r.observation});
    s = std::move(r.state);
  }
  t.outcome = s.outcome;
  t.final_state = std::move(s);
  return t;
}

}  // namespace agentprm
