#include <doctest.h>

#include <cmath>
#include <numeric>

#include "agentprm/gridnav.hpp"
#include "agentprm/policy.hpp"
#include "support.hpp"

using namespace agentprm;

TEST_CASE("uniform logits give a uniform distribution over legal actions") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  auto corner = action_distribution(p, env, env.reset(env.make_task({0, 0}, {4, 4}), 0));
  REQUIRE(corner.probs.size() == 3);
  for (double q : corner.probs) CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (Action a : corner.actions) CHECK((a.id != GridNav::Left && a.id != GridNav::Down));

  auto open = action_distribution(p, env, env.reset(env.make_task({2, 2}, {4, 4}), 0));
  CHECK(open.probs.size() == 5);
}

TEST_CASE("softmax of logits [1, 0]") {
  testing::ChainEnv env;
  EnvState s = env.reset(env.make(3), 0);
  Policy p = Policy::tabular(2);
  p.table[env.policy_key(s)] = {1.0, 0.0};
  auto d = action_distribution(p, env, s);
  double e = std::exp(1.0);
  CHECK(d.probs[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(d.probs[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  CHECK(d.probs[0] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("temperature zero is greedy with lowest-index ties") {
  testing::ChainEnv env;
  EnvState s = env.reset(env.make(3), 0);
  Policy p = Policy::tabular(2, 0.0);
  auto tie = action_distribution(p, env, s);
  CHECK(tie.probs == std::vector<double>{1.0, 0.0});
  p.table[env.policy_key(s)] = {0.0, 2.0};
  auto d = action_distribution(p, env, s);
  CHECK(d.probs == std::vector<double>{0.0, 1.0});
}

TEST_CASE("terminal states have no action distribution") {
  testing::ChainEnv env;
  EnvState s = env.reset(env.make(1), 0);
  s = env.step(s, Action{0}).state;
  REQUIRE(s.terminal);
  try {
    action_distribution(Policy::tabular(2), env, s);
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("normalization and entropy monotone in temperature") {
  GridNav env;
  Rng rng(3);
  Policy p = Policy::tabular(env.num_actions());
  EnvState s = env.reset(env.make_task({2, 2}, {4, 4}), 0);
  auto& row = p.table[env.policy_key(s)];
  row.resize(5);
  for (int trial = 0; trial < 50; ++trial) {
    for (double& v : row) v = rng.normal() * 3.0;
    double last = -1.0;
    for (double temp : {0.1, 0.3, 0.7, 1.0, 2.0, 5.0}) {
      auto d = action_distribution(p, env, s, temp);
      CHECK(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) ==
            doctest::Approx(1.0).epsilon(1e-9));
      double h = entropy(d.probs);
      CHECK(h >= last - 1e-12);
      last = h;
    }
  }
}

TEST_CASE("rollout is deterministic and respects the horizon") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  Task task = env.make_task({0, 0}, {4, 4});
  Trajectory a = rollout(p, env, task, 5);
  Trajectory b = rollout(p, env, task, 5);
  CHECK(a.action_ids() == b.action_ids());
  CHECK(a.outcome == b.outcome);

  Task one = env.make_task({0, 0}, {4, 4}, std::nullopt, 1);
  CHECK(rollout(p, env, one, 9).length() == 1);
}

TEST_CASE("greedy expert-cloned policy solves gridnav") {
  GridNav env;
  auto tasks = env.generate_tasks(20, 1);
  Policy p = Policy::tabular(env.num_actions());
  behavior_clone(p, env, expert_trajectories(env, tasks, 32, 2), {});
  p.temperature = 0.0;
  Trajectory t = rollout(p, env, env.make_task({0, 0}, {3, 3}), 0);
  CHECK(t.outcome == 1.0);
}

TEST_CASE("rollout_batch counts and distinct replicate seeds") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  auto tasks = env.generate_tasks(3, 4);
  auto batch = rollout_batch(p, env, tasks, 2, 8);
  REQUIRE(batch.size() == 6);
  CHECK(batch[0].task == tasks[0]);
  CHECK(batch[5].task == tasks[2]);
  CHECK(batch[0].seed != batch[1].seed);
  CHECK(batch[0].seed == replicate_seed(8, tasks[0], 0));
  CHECK(batch[0].action_ids() != batch[1].action_ids());
}

TEST_CASE("trajectory log-probability factorizes over steps") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  behavior_clone(p, env, expert_trajectories(env, env.generate_tasks(5, 1), 8, 1), {3, 0.2});
  Trajectory t = rollout(p, env, env.make_task({1, 1}, {4, 3}), 2);
  double expected = 0.0;
  for (const auto& step : t.steps) {
    auto logits = p.logits(env, step.state);
    auto legal = env.legal_actions(step.state);
    double z = 0.0;
    for (Action a : legal) z += std::exp(logits[static_cast<std::size_t>(a.id)]);
    expected += logits[static_cast<std::size_t>(step.action.id)] - std::log(z);
  }
  CHECK(trajectory_log_prob(p, env, t) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("replay rebuilds a trajectory and rejects mismatches") {
  GridNav env;
  Policy p = Policy::tabular(env.num_actions());
  Task task = env.make_task({0, 0}, {2, 2});
  Trajectory t = rollout(p, env, task, 3);
  std::vector<std::string> obs{t.steps.front().state.observations.front()};
  for (const auto& s : t.steps) obs.push_back(s.observation.payload);
  auto ids = t.action_ids();
  Trajectory r = replay(env, task, t.seed, ids, obs);
  CHECK(r.outcome == t.outcome);
  CHECK(r.final_state == t.final_state);

  obs.back() = "something else";
  try {
    replay(env, task, t.seed, ids, obs);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("log-prob gradient matches finite differences") {
  GridNav env;
  Policy p = Policy::linear(env.num_actions(), env.state_feature_dim());
  Rng rng(5);
  for (double& w : p.weights) w = rng.normal() * 0.3;
  EnvState s = env.reset(env.make_task({1, 2}, {4, 0}), 0);
  Action a{GridNav::Right};
  PolicyGradient g;
  accumulate_log_prob_gradient(p, env, s, a, 1.0, 1.0, g);
  auto logp = [&](const Policy& q) {
    auto d = action_distribution(q, env, s);
    for (std::size_t i = 0; i < d.actions.size(); ++i)
      if (d.actions[i] == a) return std::log(d.probs[i]);
    return 0.0;
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    Policy up = p, down = p;
    up.weights[i] += h;
    down.weights[i] -= h;
    double fd = (logp(up) - logp(down)) / (2 * h);
    CHECK(g.weights[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}
