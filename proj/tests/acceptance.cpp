// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.
//
// usage: acceptance <path to agentprm cli> <configs dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <json.hpp>

#include "agentprm/error.hpp"
#include "agentprm/harness.hpp"
#include "agentprm/oracle.hpp"
#include "agentprm/random.hpp"

namespace fs = std::filesystem;
using namespace agentprm;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

fs::path g_cli;
fs::path g_configs;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("agentprm_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Backward recursion against the explicit truncated double sum.

// A_t = sum_{l=0}^{T-t} (gamma lambda)^l delta_{t+l}, with deltas rebuilt here
// from q, v0 and the outcome rather than taken from the library.
std::vector<double> advantage_double_sum(const std::vector<double>& q, double v0, double outcome,
                                         double gamma, double lambda) {
  const std::size_t n = q.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    double prev = t == 0 ? v0 : q[t - 1];
    delta[t] = (t + 1 == n ? outcome : gamma * q[t]) - prev;
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t l = 0; t + l < n; ++l) sum += std::pow(gamma * lambda, static_cast<double>(l)) * delta[t + l];
    adv[t] = sum;
  }
  return adv;
}

Verdict gae_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  const double gammas[] = {0.9, 1.0};
  const double lambdas[] = {0.0, 0.5, 0.95, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t len = 1 + rng.below(64);
    std::vector<double> q(len);
    for (double& v : q) v = rng.uniform();
    double v0 = rng.uniform();
    double outcome = rng.below(2) ? 1.0 : 0.0;
    TdConfig cfg;
    cfg.gamma = gammas[rng.below(2)];
    cfg.lambda = lambdas[rng.below(4)];
    auto got = td_gae_targets(q, v0, outcome, cfg).advantages;
    auto want = advantage_double_sum(q, v0, outcome, cfg.gamma, cfg.lambda);
    for (std::size_t t = 0; t < len; ++t) worst = std::max(worst, std::abs(got[t] - want[t]));
  }
  double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 5.0,
          fmt::format("max |recursion - double sum| = {:.3g} over 1000 trajectories in {:.2f} s",
                      worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. The final step's Q target equals the outcome, for every labeler.

Verdict terminal_pinning() {
  std::size_t checked = 0, violations = 0;
  auto check = [&](const std::vector<Trajectory>& trajs, const std::vector<LabeledStep>& labels) {
    for (const auto& l : labels) {
      const Trajectory& t = trajs[l.trajectory];
      if (static_cast<std::size_t>(l.step_index) + 1 != t.length()) continue;
      ++checked;
      if (l.q_target != t.outcome) ++violations;
    }
  };
  GridNavConfig graded;
  graded.key_fraction = 0.5;
  graded.graded_reward = true;
  std::vector<std::unique_ptr<Environment>> envs;
  envs.push_back(std::make_unique<GridNav>(graded));
  envs.push_back(std::make_unique<CraftDag>());
  std::size_t trajectories = 0;
  for (const auto& env : envs) {
    auto tasks = env->generate_tasks(30, 5);
    Policy policy = Policy::tabular(env->num_actions());
    CostLedger ledger;
    auto trajs = collect_trajectories(policy, *env, tasks, 4, 11, ledger);
    trajectories += trajs.size();
    RewardModel fresh = RewardModel::tabular(Variant::AgentPrm);
    RewardModel trained = train(fresh, *env, trajs, TrainConfig{}, Variant::AgentPrm, ledger).model;
    RewardModel mlp = RewardModel::mlp(Variant::AgentPrm, *env, 8, 3);
    for (const RewardModel* m : {&fresh, &trained, &mlp}) {
      for (double lambda : {0.0, 0.95, 1.0}) {
        TdConfig td;
        td.lambda = lambda;
        check(trajs, estimate_td_gae(*m, *env, trajs, td, ledger));
      }
    }
    check(trajs, estimate_mc(policy, *env, trajs, 4, 1.0, ledger, 12));
  }
  return {violations == 0 && checked > 0,
          fmt::format("{} of {} terminal labels differ from the outcome ({} trajectories, td and mc)",
                      violations, checked, trajectories)};
}

// ---------------------------------------------------------------------------
// Shared enumerable setup for criteria 3 and 11: one GridNav task under a
// fixed, mildly informed policy.

struct Enumerable {
  GridNav env;
  std::vector<Task> tasks;
  Policy policy = Policy::tabular(5, 1.0);

  Enumerable() {
    tasks.push_back(env.make_task({0, 0}, {3, 2}));
    behavior_clone(policy, env, expert_trajectories(env, tasks, 4, 1), {1, 0.3});
  }

  RewardModel trained(std::vector<Trajectory>& trajs) const {
    CostLedger ledger;
    trajs = collect_trajectories(policy, env, tasks, 1000, 3, ledger);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 2.0;
    return train(RewardModel::tabular(Variant::AgentPrm), env, trajs, cfg, Variant::AgentPrm, ledger)
        .model;
  }
};

// 3. Tabular scores against exact Q^pi from backward induction.
Verdict tabular_convergence() {
  auto t0 = std::chrono::steady_clock::now();
  Enumerable e;
  QTable q = exact_q(e.env, e.policy, e.tasks);
  std::vector<Trajectory> trajs;
  RewardModel model = e.trained(trajs);
  double err = 0.0;
  std::size_t n = 0;
  for (const auto& t : trajs)
    for (const auto& s : t.steps) {
      err += std::abs(model.score(e.env, s.state, s.action) - q.at(e.env, s.state, s.action));
      ++n;
    }
  double mae = err / static_cast<double>(n);
  double secs = seconds_since(t0);
  return {mae <= 0.05 && q.num_states() <= 500 && secs < 60.0,
          fmt::format("MAE {:.4f} over {} visited steps, {} states, 200 epochs in {:.1f} s", mae, n,
                      q.num_states(), secs)};
}

// ---------------------------------------------------------------------------
// 4. Analytic gradient of L_Q + beta L_A on the mlp backend against central
// differences.

Verdict gradient_check() {
  Rng rng(4242);
  GridNav grid(GridNavConfig{5, 5, 20, 0.5});
  CraftDag craft;
  double worst = 0.0;
  std::size_t params = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const Environment& env = instance % 2 == 0 ? static_cast<const Environment&>(grid) : craft;
    std::size_t hidden = 4 + rng.below(13);
    RewardModel m = RewardModel::mlp(Variant::AgentPrm, env, hidden, rng.next());
    double beta = 2.0 * rng.uniform();
    Policy p = Policy::tabular(env.num_actions());
    auto tasks = env.generate_tasks(1 + rng.below(3), rng.next());
    std::vector<TrajectoryTargets> batch;
    for (Task task : tasks) {
      task.horizon = 1 + static_cast<int>(rng.below(6));
      Trajectory t = rollout(p, env, task, rng.next());
      TrajectoryTargets tt;
      tt.inputs = encode_trajectory(m, env, t);
      for (std::size_t i = 0; i < tt.inputs.size(); ++i) tt.q_targets.push_back(rng.uniform());
      if (rng.below(2)) {
        tt.begin_input = m.encode(env, t.steps.front().state, kBeginAction);
        tt.begin_target = rng.uniform();
      }
      batch.push_back(std::move(tt));
    }
    RewardModel::Gradient g;
    evaluate_objective(m, batch, beta, true, &g);
    const double h = 1e-6;
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      RewardModel up = m, down = m;
      up.parameters()[i] += h;
      down.parameters()[i] -= h;
      double fd = (evaluate_objective(up, batch, beta, true).total -
                   evaluate_objective(down, batch, beta, true).total) /
                  (2.0 * h);
      double scale = std::max({std::abs(fd), std::abs(g.dense[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - g.dense[i]) / scale);
      ++params;
    }
  }
  return {worst <= 1e-4, fmt::format("max relative error {:.3g} over {} parameters in 50 instances",
                                     worst, params)};
}

// ---------------------------------------------------------------------------
// 5. Detour advantage on GridNav-with-key.

struct DetourStat {
  double advantage = 0.0;  // mean A-hat of the first move toward the key
  double rank = 0.0;       // mean Q(toward key) - Q(greedy toward goal)
  int n = 0;
};

DetourStat detour_stat(const RewardModel& m, const GridNav& env, const std::vector<Trajectory>& trajs) {
  DetourStat s;
  for (const auto& t : trajs) {
    if (t.outcome < 1.0) continue;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const EnvState& st = t.steps[i].state;
      if (!GridNav::key_pending(st)) break;
      Action a = t.steps[i].action;
      auto toward_key = env.moves_toward(st, *GridNav::key_of(*st.task));
      if (std::find(toward_key.begin(), toward_key.end(), a) == toward_key.end()) continue;
      double prev = i == 0 ? m.score(env, st, kBeginAction)
                           : m.score(env, t.steps[i - 1].state, t.steps[i - 1].action);
      double here = m.score(env, st, a);
      s.advantage += here - prev;
      auto toward_goal = env.moves_toward(st, GridNav::goal_of(*st.task));
      if (!toward_goal.empty()) s.rank += here - m.score(env, st, toward_goal.front());
      ++s.n;
      break;
    }
  }
  if (s.n > 0) {
    s.advantage /= s.n;
    s.rank /= s.n;
  }
  return s;
}

Verdict detour_advantage() {
  ExperimentSpec spec = load_experiment(g_configs / "gridnav_key.json");
  GridNav env(spec.env.gridnav);
  auto split = split_tasks(env, spec.tasks);
  int positive = 0, below = 0;
  const int runs = 20;
  for (int seed = 0; seed < runs; ++seed) {
    Policy policy = initial_policy(env, split.train, spec.policy, seed);
    CostLedger ledger;
    auto trajs = collect_trajectories(policy, env, split.train, spec.per_task, seed, ledger);
    auto eval = rollout_batch(policy, env, split.eval, 4, seed + 1000);
    TrainConfig cfg = spec.train;
    cfg.seed = seed;
    RewardModel init = RewardModel::tabular(Variant::AgentPrm);
    auto with_a = train(init, env, trajs, cfg, Variant::AgentPrm, ledger).model;
    cfg.beta = 0.0;
    auto without_a = train(init, env, trajs, cfg, Variant::AgentPrm, ledger).model;
    auto s1 = detour_stat(with_a, env, eval);
    auto s0 = detour_stat(without_a, env, eval);
    positive += s1.n > 0 && s1.advantage > 0.0;
    below += s0.n > 0 && s0.rank < 0.0;
  }
  bool ok = positive * 10 >= runs * 9 && below * 2 >= runs;
  return {ok, fmt::format("beta=1 positive A-hat in {}/{} runs (need 18); beta=0 ranks the key move "
                          "below the goal move in {}/{} runs (need 10)",
                          positive, runs, below, runs)};
}

// ---------------------------------------------------------------------------
// Shared per-seed pipeline for criteria 6 and 7.

struct Trained {
  std::unique_ptr<Environment> env;
  TaskSplit split;
  Policy policy;
  RewardModel agentprm;
  RewardModel pvm;
};

Trained pipeline(const ExperimentSpec& spec, std::uint64_t seed, bool with_pvm) {
  Trained t;
  t.env = make_environment(spec.env);
  t.split = split_tasks(*t.env, spec.tasks);
  t.policy = initial_policy(*t.env, t.split.train, spec.policy, seed);
  CostLedger ledger;
  auto trajs = collect_trajectories(t.policy, *t.env, t.split.train, spec.per_task, seed, ledger);
  TrainConfig cfg = spec.train;
  cfg.seed = seed;
  t.agentprm = train(RewardModel::tabular(Variant::AgentPrm), *t.env, trajs, cfg, Variant::AgentPrm,
                     ledger)
                   .model;
  if (with_pvm) {
    t.pvm = train(RewardModel::tabular(Variant::Pvm), *t.env, trajs, cfg, Variant::Pvm, ledger).model;
  }
  return t;
}

// 6. Beam @4x4 against greedy decoding of the same policy.
Verdict search_lift() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const char* file : {"gridnav.json", "craftdag.json"}) {
    ExperimentSpec spec = load_experiment(g_configs / file);
    double beam = 0.0, greedy = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Trained t = pipeline(spec, seed, false);
      SearchConfig sc = spec.search;
      sc.beam_n = 4;
      sc.expand_m = 4;
      beam += evaluate_beam(t.policy, model_scorer(t.agentprm, *t.env), *t.env, t.split.eval, sc, seed)
                  .success;
      greedy += evaluate_greedy(t.policy, *t.env, t.split.eval, seed);
    }
    beam /= 5.0;
    greedy /= 5.0;
    ok = ok && beam > greedy;
    detail += fmt::format("{} beam {:.3f} vs greedy {:.3f}; ", spec.env.family, beam, greedy);
  }
  double secs = seconds_since(t0);
  ok = ok && secs < 600.0;
  return {ok, detail + fmt::format("{:.1f} s", secs)};
}

// 7. BoN@16 ordering: AgentPRM >= PVM >= random selection.
Verdict variant_ordering() {
  ExperimentSpec spec = load_experiment(g_configs / "gridnav_key.json");
  const std::vector<int> ns = {16};
  double agent = 0.0, pvm = 0.0, random = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Trained t = pipeline(spec, seed, true);
    auto a = evaluate_bon(t.policy, t.agentprm, *t.env, t.split.eval, ns, seed, spec.search.sample_temperature);
    auto p = evaluate_bon(t.policy, t.pvm, *t.env, t.split.eval, ns, seed, spec.search.sample_temperature);
    agent += a.model[0];
    pvm += p.model[0];
    random += a.random[0];
  }
  agent /= 5.0;
  pvm /= 5.0;
  random /= 5.0;
  bool ok = agent >= pvm && pvm >= random && agent > random;
  return {ok, fmt::format("AgentPRM {:.3f} >= PVM {:.3f} >= random {:.3f}", agent, pvm, random)};
}

// ---------------------------------------------------------------------------
// 8. MC versus TD labeling cost at N_mc = N_TD = 16, horizon 20.

Verdict sampling_cost() {
  bool ok = true;
  std::string detail;
  for (const char* file : {"gridnav.json", "craftdag.json"}) {
    ExperimentSpec spec = load_experiment(g_configs / file);
    auto env = make_environment(spec.env);
    auto split = split_tasks(*env, spec.tasks);
    std::vector<Task> tasks(split.train.begin(), split.train.begin() + 50);
    for (const Task& t : tasks)
      if (t.horizon != 20) throw Error(ErrorKind::Internal, "expected horizon 20");
    Policy policy = initial_policy(*env, split.train, spec.policy, 0);
    CostLedger td, mc;
    auto trajs = collect_trajectories(policy, *env, tasks, 16, 1, td);
    mc = td;
    estimate_td_gae(RewardModel::tabular(Variant::AgentPrm), *env, trajs, spec.train.td, td);
    estimate_mc(policy, *env, trajs, 16, spec.label.threshold, mc, 2);
    double ratio = cost_ratio(mc, td);
    ok = ok && ratio > 8.0;
    detail += fmt::format("{} ratio {:.1f} ({} / {} steps); ", spec.env.family, ratio, mc.env_steps,
                          td.env_steps);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 9. PPO with the environment oracle and with a trained AgentPRM.

Verdict ppo_sanity() {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec spec = load_experiment(g_configs / "gridnav_rl.json");
  GridNav env(spec.env.gridnav);
  auto split = split_tasks(env, spec.tasks);
  int oracle_ok = 0, agent_ok = 0;
  std::string gains;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Policy start = Policy::tabular(env.num_actions(), spec.policy.temperature);
    PpoConfig cfg = spec.rl.ppo;
    cfg.iterations = 200;

    cfg.reward_source = RewardSource::EnvOracle;
    auto r = ppo_train(start, nullptr, env, split.train, split.eval, cfg, seed);
    double oracle_gain = r.reports.back().mean_task_score - r.reports.front().mean_task_score;
    oracle_ok += oracle_gain >= 0.2;

    CostLedger ledger;
    auto trajs = collect_trajectories(start, env, split.train, spec.per_task, seed, ledger);
    TrainConfig tc = spec.train;
    tc.seed = seed;
    RewardModel model =
        train(RewardModel::tabular(Variant::AgentPrm), env, trajs, tc, Variant::AgentPrm, ledger).model;
    cfg.reward_source = RewardSource::AgentPrm;
    auto a = ppo_train(start, &model, env, split.train, split.eval, cfg, seed);
    double agent_gain = a.reports.back().mean_task_score - a.reports.front().mean_task_score;
    agent_ok += agent_gain > 0.0;
    gains += fmt::format(" {:+.2f}/{:+.2f}", oracle_gain, agent_gain);
  }
  double secs = seconds_since(t0);
  bool ok = oracle_ok == 5 && agent_ok >= 4 && secs < 900.0;
  return {ok, fmt::format("env-oracle +0.2 on {}/5, agentprm positive on {}/5 (gains{}) in {:.0f} s",
                          oracle_ok, agent_ok, gains, secs)};
}

// ---------------------------------------------------------------------------
// 10. Every CLI verb, twice, byte-compared after the timestamp line.

std::string after_first_line(const std::string& s) {
  auto nl = s.find('\n');
  return nl == std::string::npos ? std::string() : s.substr(nl + 1);
}

Verdict cli_determinism() {
  fs::path dir = scratch("cli");
  json cfg = json::parse(read_file(g_configs / "gridnav.json"));
  cfg["name"] = "determinism";
  cfg["tasks"] = {{"train", 20}, {"eval", 8}, {"seed", 7}};
  cfg["collect"] = {{"per_task", 2}};
  cfg["label"]["n_mc"] = 2;
  cfg["bon_ns"] = {1, 4};
  cfg["beam_points"] = {{2, 2}};
  cfg["rl"] = {{"enabled", true}, {"iterations", 3}, {"batch_size", 8}};
  cfg["seeds"] = {0, 1};
  fs::path config = dir / "config.json";
  write_file(config, cfg.dump(2));

  const std::vector<std::string> verbs = {
      "collect",
      "label --method td",
      "label --method mc",
      "train --variant agentprm",
      "train --variant pvm",
      "train --variant orm",
      "eval-bon --n 1,4",
      "eval-beam --beam 2 --expand 2",
      "rl --reward-source agentprm",
      "histogram --buckets 10",
      "summarize {out}/metrics_eval_bon_agentprm.jsonl {out}/metrics_train_agentprm.jsonl",
      "run",
      "train --variant agentprm --beta 0 --labels {out}/labels_mc.jsonl",
  };
  std::vector<fs::path> outs = {dir / "a", dir / "b"};
  std::string failures;
  for (const auto& out : outs) {
    fs::create_directories(out);
    for (std::string verb : verbs) {
      for (auto at = verb.find("{out}"); at != std::string::npos; at = verb.find("{out}"))
        verb.replace(at, 5, out.string());
      std::string cmd = fmt::format("\"{}\" --config \"{}\" --seed 3 --out \"{}\" {} > \"{}\" 2>&1",
                                    g_cli.string(), config.string(), out.string(), verb,
                                    (out / "stdout.txt").string());
      if (std::system(cmd.c_str()) != 0) failures += " [" + verb + " exited nonzero]";
    }
  }
  // Metrics streams carry a timestamp line first; every other artifact must
  // match byte for byte.
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(outs[0])) {
    if (!entry.is_regular_file() || entry.path().filename() == "stdout.txt") continue;
    fs::path rel = fs::relative(entry.path(), outs[0]);
    fs::path other = outs[1] / rel;
    if (!fs::exists(other)) {
      failures += " [" + rel.string() + " missing in second run]";
      continue;
    }
    std::string a = read_file(entry.path()), b = read_file(other);
    if (a.rfind("{\"created\"", 0) == 0) {
      a = after_first_line(a);
      b = after_first_line(b);
    }
    if (a != b) failures += " [" + rel.string() + "]";
    ++compared;
  }
  bool ok = failures.empty() && compared >= verbs.size();
  return {ok, fmt::format("{} verbs, {} output files compared{}", verbs.size(), compared,
                          failures.empty() ? "" : "; differences:" + failures)};
}

// ---------------------------------------------------------------------------
// 11. Value histogram separation on enumerable GridNav.

Verdict value_separation() {
  Enumerable e;
  std::vector<Trajectory> trajs;
  RewardModel model = e.trained(trajs);
  auto fresh = rollout_batch(e.policy, e.env, e.tasks, 500, 77);
  auto h = export_value_histogram(model, e.env, fresh, 10);
  // Reference: the same partition scored by exact Q^pi.
  QTable q = exact_q(e.env, e.policy, e.tasks);
  double qs = 0.0, qf = 0.0;
  std::size_t ns = 0, nf = 0;
  for (const auto& t : fresh)
    for (const auto& s : t.steps) {
      double v = q.at(e.env, s.state, s.action);
      if (t.outcome >= 1.0) {
        qs += v;
        ++ns;
      } else {
        qf += v;
        ++nf;
      }
    }
  double gap = h.success_mean - h.failure_mean;
  bool ok = ns > 0 && nf > 0 && gap >= 0.1;
  return {ok, fmt::format("model success {:.3f} vs failure {:.3f} (gap {:.3f}); exact Q {:.3f} vs {:.3f}",
                          h.success_mean, h.failure_mean, gap, qs / static_cast<double>(ns),
                          qf / static_cast<double>(nf))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <agentprm cli> <configs dir>\n", argv[0]);
    return 2;
  }
  g_cli = fs::absolute(argv[1]);
  g_configs = fs::absolute(argv[2]);

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gae-oracle-equivalence", gae_equivalence},
      {2, "terminal-pinning", terminal_pinning},
      {3, "tabular-convergence", tabular_convergence},
      {4, "gradient-check", gradient_check},
      {5, "detour-advantage", detour_advantage},
      {6, "search-lift", search_lift},
      {7, "variant-ordering", variant_ordering},
      {8, "sampling-cost", sampling_cost},
      {9, "ppo-sanity", ppo_sanity},
      {10, "cli-determinism", cli_determinism},
      {11, "value-separation", value_separation},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s  %2d %-24s %7.2fs  %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0),
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
