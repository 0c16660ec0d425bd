#include <doctest.h>

#include <cmath>

#include "agentprm/gridnav.hpp"
#include "agentprm/labeling.hpp"
#include "support.hpp"

using namespace agentprm;
using testing::gae_double_sum;

namespace {

/// delta by the definition, independent of td_residuals.
std::vector<double> residuals(const std::vector<double>& q, double v0, double r, double gamma) {
  std::vector<double> d;
  for (std::size_t t = 0; t < q.size(); ++t) {
    double prev = t == 0 ? v0 : q[t - 1];
    d.push_back(t + 1 == q.size() ? r - prev : gamma * q[t] - prev);
  }
  return d;
}

TdConfig zero_v0(double gamma, double lambda) {
  TdConfig c;
  c.gamma = gamma;
  c.lambda = lambda;
  c.v0_mode = V0Mode::Zero;
  return c;
}

}  // namespace

TEST_CASE("gae on a two-step trajectory") {
  std::vector<double> q = {0.2, 0.5};
  auto oracle = gae_double_sum(residuals(q, 0.0, 1.0, 1.0), 0.95);
  CHECK(oracle[0] == doctest::Approx(0.96).epsilon(1e-12));
  CHECK(oracle[1] == doctest::Approx(0.8).epsilon(1e-12));

  auto g = td_gae_targets(q, 0.0, 1.0, zero_v0(1.0, 0.95));
  CHECK(std::abs(g.advantages[0] - oracle[0]) <= 1e-12);
  CHECK(std::abs(g.advantages[1] - oracle[1]) <= 1e-12);
  CHECK(g.q_targets[1] == 1.0);
  CHECK(std::abs(g.q_targets[0] - (oracle[0] + 0.0)) <= 1e-12);
}

TEST_CASE("gae on a three-step trajectory") {
  std::vector<double> q = {0.2, 0.5, 0.8};
  auto d = residuals(q, 0.0, 1.0, 1.0);
  auto oracle = gae_double_sum(d, 0.95);
  // Hand values for the same sums.
  CHECK(oracle[0] == doctest::Approx(0.93625).epsilon(1e-12));
  CHECK(oracle[1] == doctest::Approx(0.775).epsilon(1e-12));
  CHECK(oracle[2] == doctest::Approx(0.5).epsilon(1e-12));

  auto g = td_gae_targets(q, 0.0, 1.0, zero_v0(1.0, 0.95));
  for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(g.advantages[t] - oracle[t]) <= 1e-12);
  std::vector<double> q_hat = {oracle[0] + 0.0, oracle[1] + q[0], 1.0};
  for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(g.q_targets[t] - q_hat[t]) <= 1e-12);
  CHECK(q_hat[1] == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("lambda 0 collapses to the residuals") {
  Rng rng(1);
  std::vector<double> q(10);
  for (double& v : q) v = rng.uniform();
  auto d = residuals(q, 0.3, 1.0, 0.9);
  CHECK(td_residuals(q, 0.3, 1.0, 0.9) == d);
  auto g = td_gae_targets(q, 0.3, 1.0, zero_v0(0.9, 0.0));
  CHECK(g.advantages == d);
}

TEST_CASE("gae recursion matches the explicit sum on random inputs") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(64);
    std::vector<double> q(n);
    for (double& v : q) v = rng.uniform();
    double gamma = rng.uniform() < 0.5 ? 0.9 : 1.0;
    double lambda = std::vector<double>{0.0, 0.5, 0.95, 1.0}[rng.below(4)];
    double r = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto oracle = gae_double_sum(residuals(q, 0.0, r, gamma), gamma * lambda);
    auto g = td_gae_targets(q, 0.0, r, zero_v0(gamma, lambda));
    for (std::size_t t = 0; t < n; ++t) CHECK(std::abs(g.advantages[t] - oracle[t]) <= 1e-10);
  }
}

TEST_CASE("terminal pinning and the telescoping identity are exact") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(30);
    std::vector<double> q(n);
    for (double& v : q) v = rng.uniform();
    double v0 = rng.uniform();
    double r = rng.uniform();
    TdConfig c;
    auto g = td_gae_targets(q, v0, r, c);
    CHECK(g.q_targets.back() == r);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      double prev = t == 0 ? v0 : q[t - 1];
      CHECK(g.q_targets[t] - prev == g.adv_targets[t]);
    }
  }
}

TEST_CASE("gamma 1 lambda 1 telescopes to outcome minus previous value") {
  std::vector<double> q = {0.1, 0.4, 0.7};
  double v0 = 0.25;
  auto g = td_gae_targets(q, v0, 1.0, zero_v0(1.0, 1.0));
  // A_0 = (q0 - v0) + (q1 - q0) + (r - q1) = r - v0, and so on.
  CHECK(g.advantages[0] == doctest::Approx(1.0 - v0).epsilon(1e-12));
  CHECK(g.advantages[1] == doctest::Approx(1.0 - q[0]).epsilon(1e-12));
  CHECK(g.advantages[2] == doctest::Approx(1.0 - q[1]).epsilon(1e-12));
}

TEST_CASE("td labels from a model use no rollouts") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  auto tasks = env.generate_tasks(3, 2);
  CostLedger collect;
  auto trajs = collect_trajectories(p, env, tasks, 16, 5, collect);
  CHECK(collect.rollouts == 16 * tasks.size());
  CHECK(collect.env_steps >= collect.rollouts);

  CostLedger ledger;
  RewardModel m = RewardModel::tabular(Variant::AgentPrm);
  auto labels = estimate_td_gae(m, env, trajs, TdConfig{}, ledger);
  std::size_t steps = 0;
  for (const auto& t : trajs) steps += t.length();
  CHECK(labels.size() == steps);
  CHECK(ledger.labeled_steps == steps);
  CHECK(ledger.env_steps == 0);
  CHECK(ledger.rollouts == 0);
  for (const auto& l : labels) {
    if (static_cast<std::size_t>(l.step_index) + 1 == trajs[l.trajectory].length())
      CHECK(l.q_target == trajs[l.trajectory].outcome);
  }

  std::vector<Trajectory> empty(1);
  CHECK_THROWS_AS(estimate_td_gae(m, env, empty, TdConfig{}, ledger), Error);
}

TEST_CASE("begin token value comes from the model") {
  GridNav env;
  Trajectory t = replay(env, env.make_task({0, 0}, {1, 0}), 0, std::vector<int>{3});
  RewardModel m = RewardModel::tabular(Variant::AgentPrm);
  m.table()[m.encode(env, t.steps[0].state, kBeginAction).key] = 0.3;
  CHECK(begin_value(m, env, t, TdConfig{}) == 0.3);
  CHECK(begin_value(m, env, t, zero_v0(1.0, 0.95)) == 0.0);
}

TEST_CASE("mc labels on a deterministic solvable instance") {
  GridNav env;
  auto tasks = env.generate_tasks(6, 3);
  Policy p = Policy::tabular(env.num_actions());
  behavior_clone(p, env, expert_trajectories(env, tasks, 32, 1), {});
  p.temperature = 0.0;
  std::vector<Trajectory> trajs;
  for (const Task& task : tasks) trajs.push_back(rollout(p, env, task, 0));
  CostLedger ledger;
  auto labels = estimate_mc(p, env, trajs, 1, 1.0, ledger, 9);
  for (const auto& l : labels) {
    if (trajs[l.trajectory].outcome == 1.0) CHECK(l.q_target == 1.0);
  }
}

TEST_CASE("mc labels are zero when the goal is out of reach") {
  GridNav env;
  Task task = env.make_task({0, 0}, {4, 4}, std::nullopt, 5);
  Policy p = Policy::tabular(env.num_actions());
  std::vector<Trajectory> trajs{replay(env, task, 0, std::vector<int>{4, 4, 4, 4, 4})};
  CostLedger ledger;
  auto labels = estimate_mc(p, env, trajs, 16, 1.0, ledger, 1);
  for (const auto& l : labels) CHECK(l.q_target == 0.0);
}

TEST_CASE("mc label is one iff some resumed rollout succeeds") {
  testing::ChainEnv env;
  Policy p = Policy::tabular(2);
  std::vector<Task> tasks{env.make(5)};
  CostLedger collect;
  auto trajs = collect_trajectories(p, env, tasks, 30, 2, collect);
  CostLedger ledger;
  McTrace trace;
  auto labels = estimate_mc(p, env, trajs, 4, 1.0, ledger, 3, &trace);
  std::uint64_t resumed = 0;
  for (const auto& l : labels) {
    const auto& outs = trace.outcomes[l.trajectory][static_cast<std::size_t>(l.step_index)];
    resumed += outs.size();
    if (outs.empty()) {
      CHECK(l.q_target == trajs[l.trajectory].outcome);
      continue;
    }
    CHECK(outs.size() == 4);
    bool any = false;
    for (double o : outs) any = any || o >= 1.0;
    CHECK(l.q_target == (any ? 1.0 : 0.0));
  }
  CHECK(ledger.rollouts == resumed);
  double prev = 0.0;
  for (const auto& l : labels) {
    if (l.step_index == 0) prev = 0.0;
    CHECK(l.adv_target == l.q_target - prev);
    prev = l.q_target;
  }
}

TEST_CASE("mc cost matches the closed-form count on a chain") {
  testing::ChainEnv env;
  const int length = 8;
  const int n_mc = 4;
  Policy p = Policy::tabular(2, 0.0);
  std::vector<Task> tasks{env.make(length)};
  CostLedger td;
  auto trajs = collect_trajectories(p, env, tasks, 1, 0, td);
  CostLedger mc = td;
  estimate_mc(p, env, trajs, n_mc, 1.0, mc, 0);
  // Resuming from position t + 1 takes length - t - 1 steps, for t < length - 1.
  double expected = 1.0 + n_mc * (length - 1) / 2.0;
  CHECK(cost_ratio(mc, td) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(cost_ratio(td, td) == 1.0);
  CHECK_THROWS_AS(cost_ratio(mc, CostLedger{}), Error);
  CHECK_THROWS_AS(estimate_mc(p, env, trajs, 0, 1.0, mc, 0), Error);
}

TEST_CASE("v0 mode names round-trip") {
  CHECK(parse_v0_mode("zero") == V0Mode::Zero);
  CHECK(parse_v0_mode("learned-begin-token") == V0Mode::LearnedBeginToken);
  CHECK(to_string(V0Mode::Zero) == "zero");
  CHECK_THROWS_AS(parse_v0_mode("guess"), Error);
}
