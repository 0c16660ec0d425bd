#include "agentprm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

using nlohmann::json;

namespace {

// Reads known keys from an object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorKind::Config, fmt::format("{} must be an object", where_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    used_.insert(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::Config, fmt::format("{}.{} has the wrong type", where_, key));
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (used_.count(k) == 0) throw Error(ErrorKind::Config, fmt::format("unknown key {}.{}", where_, k));
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

void parse_env(const json& j, EnvSpec& e) {
  Fields f(j, "env");
  f.get("family", e.family);
  if (e.family == "gridnav") {
    f.get("width", e.gridnav.width);
    f.get("height", e.gridnav.height);
    f.get("horizon", e.gridnav.horizon);
    f.get("key_fraction", e.gridnav.key_fraction);
    f.get("graded_reward", e.gridnav.graded_reward);
    f.get("detour_keys", e.gridnav.detour_keys);
  } else if (e.family == "craftdag") {
    f.get("horizon", e.craftdag.horizon);
    f.get("inventory_cap", e.craftdag.inventory_cap);
  } else {
    throw Error(ErrorKind::Config, fmt::format("unknown environment family '{}'", e.family));
  }
  f.finish();
}

void parse_train(const json& j, TrainConfig& t) {
  Fields f(j, "train");
  f.get("beta", t.beta);
  f.get("epochs", t.epochs);
  f.get("batch_size", t.batch_size);
  double lr = 0.0;
  f.get("learning_rate", lr);
  if (lr != 0.0) t.learning_rate = lr;
  std::string s;
  f.get("optimizer", s);
  if (!s.empty()) t.optimizer = parse_optimizer(s);
  s.clear();
  f.get("cadence", s);
  if (!s.empty()) t.cadence = parse_cadence(s);
  f.get("gamma", t.td.gamma);
  f.get("lambda", t.td.lambda);
  s.clear();
  f.get("v0_mode", s);
  if (!s.empty()) t.td.v0_mode = parse_v0_mode(s);
  f.finish();
}

void parse_ppo(const json& j, RlSpec& r) {
  Fields f(j, "rl");
  f.get("enabled", r.enabled);
  f.get("init", r.init);
  auto& p = r.ppo;
  f.get("batch_size", p.batch_size);
  f.get("learning_rate", p.learning_rate);
  f.get("kl_coeff", p.kl_coeff);
  f.get("temperature", p.temperature);
  f.get("horizon", p.horizon);
  f.get("iterations", p.iterations);
  f.get("clip_ratio", p.clip_ratio);
  f.get("update_epochs", p.update_epochs);
  std::string s;
  f.get("reward_source", s);
  if (!s.empty()) p.reward_source = parse_reward_source(s);
  f.get("dense_rewards", p.dense_rewards);
  f.get("normalize_advantages", p.normalize_advantages);
  f.get("critic_learning_rate", p.critic_learning_rate);
  f.finish();
}

std::uint64_t useed(std::int64_t s) { return static_cast<std::uint64_t>(s); }

}  // namespace

std::unique_ptr<Environment> make_environment(const EnvSpec& spec) {
  if (spec.family == "gridnav") return std::make_unique<GridNav>(spec.gridnav);
  if (spec.family == "craftdag") return std::make_unique<CraftDag>(spec.craftdag);
  throw Error(ErrorKind::Config, fmt::format("unknown environment family '{}'", spec.family));
}

ExperimentSpec parse_experiment(const json& j) {
  ExperimentSpec s;
  Fields f(j, "config");
  f.get("name", s.name);
  if (auto* e = f.child("env")) parse_env(*e, s.env);
  if (auto* t = f.child("tasks")) {
    Fields g(*t, "tasks");
    g.get("train", s.tasks.train);
    g.get("eval", s.tasks.eval);
    g.get("seed", s.tasks.seed);
    g.finish();
  }
  if (auto* p = f.child("policy")) {
    Fields g(*p, "policy");
    std::string mode;
    g.get("mode", mode);
    if (mode == "linear") {
      s.policy.mode = PolicyMode::Linear;
    } else if (!mode.empty() && mode != "tabular") {
      throw Error(ErrorKind::Config, fmt::format("unknown policy mode '{}'", mode));
    }
    g.get("temperature", s.policy.temperature);
    g.get("demos", s.policy.demos);
    g.get("bc_epochs", s.policy.bc.epochs);
    g.get("bc_learning_rate", s.policy.bc.learning_rate);
    g.finish();
  }
  if (auto* c = f.child("collect")) {
    Fields g(*c, "collect");
    g.get("per_task", s.per_task);
    g.finish();
  }
  if (auto* m = f.child("model")) {
    Fields g(*m, "model");
    std::string v;
    g.get("variant", v);
    if (!v.empty()) s.model.variant = parse_variant(v);
    v.clear();
    g.get("backend", v);
    if (!v.empty()) s.model.backend = parse_backend(v);
    g.get("hidden", s.model.hidden);
    g.finish();
  }
  if (auto* t = f.child("train")) parse_train(*t, s.train);
  if (auto* l = f.child("label")) {
    Fields g(*l, "label");
    g.get("method", s.label.method);
    g.get("n_mc", s.label.n_mc);
    g.get("threshold", s.label.threshold);
    g.finish();
  }
  if (auto* c = f.child("search")) {
    Fields g(*c, "search");
    g.get("beam_n", s.search.beam_n);
    g.get("expand_m", s.search.expand_m);
    g.get("max_steps", s.search.max_steps);
    g.get("temperature", s.search.sample_temperature);
    g.finish();
  }
  f.get("bon_ns", s.bon_ns);
  f.get("beam_points", s.beam_points);
  if (auto* r = f.child("rl")) parse_ppo(*r, s.rl);
  f.get("histogram_buckets", s.histogram_buckets);
  f.get("seeds", s.seeds);
  f.finish();
  validate(s);
  return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_experiment(j);
}

void validate(const ExperimentSpec& s) {
  if (s.seeds.empty()) throw Error(ErrorKind::Config, "seeds must be non-empty");
  if (s.tasks.train == 0) throw Error(ErrorKind::Config, "tasks.train must be positive");
  if (s.per_task < 1) throw Error(ErrorKind::Config, "collect.per_task must be >= 1");
  if (s.label.method != "td" && s.label.method != "mc") {
    throw Error(ErrorKind::Config, fmt::format("unknown label method '{}'", s.label.method));
  }
  if (s.label.n_mc < 1) throw Error(ErrorKind::Config, "label.n_mc must be >= 1");
  if (s.histogram_buckets < 2) throw Error(ErrorKind::Config, "histogram_buckets must be >= 2");
  if (s.rl.init != "uniform" && s.rl.init != "bc") {
    throw Error(ErrorKind::Config, fmt::format("unknown rl.init '{}'", s.rl.init));
  }
  for (int n : s.bon_ns) {
    if (n < 1) throw Error(ErrorKind::Config, "bon_ns entries must be >= 1");
  }
  for (auto [n, m] : s.beam_points) {
    SearchConfig c = s.search;
    c.beam_n = n;
    c.expand_m = m;
    validate(c);
  }
  validate(s.search);
  validate(s.rl.ppo);
  if (s.model.backend == Backend::Mlp && s.model.hidden == 0) {
    throw Error(ErrorKind::Config, "model.hidden must be positive");
  }
  make_environment(s.env);
}

bool is_eval_task(const Task& task) { return hash_string(task.id) % 5 == 0; }

TaskSplit split_tasks(const Environment& env, const TaskSpec& spec) {
  std::size_t want = spec.train + spec.eval;
  auto pool = env.generate_tasks(want * 6, spec.seed);
  TaskSplit split;
  for (auto& t : pool) {
    auto& side = is_eval_task(t) ? split.eval : split.train;
    std::size_t cap = is_eval_task(t) ? spec.eval : spec.train;
    if (side.size() < cap) side.push_back(std::move(t));
  }
  return split;
}

Policy initial_policy(const Environment& env, std::span<const Task> train_tasks,
                      const PolicySpec& spec, std::uint64_t seed) {
  Policy p = spec.mode == PolicyMode::Tabular
                 ? Policy::tabular(env.num_actions(), spec.temperature)
                 : Policy::linear(env.num_actions(), env.state_feature_dim(), spec.temperature);
  if (spec.demos > 0) {
    auto demos = expert_trajectories(env, train_tasks, spec.demos, seed);
    behavior_clone(p, env, demos, spec.bc);
  }
  return p;
}

RewardModel initial_model(const Environment& env, const ModelSpec& spec, std::uint64_t seed) {
  if (spec.backend == Backend::Tabular) return RewardModel::tabular(spec.variant);
  return RewardModel::mlp(spec.variant, env, spec.hidden, derive_seed(seed, 0x6d6c70ULL));
}

BonCurve evaluate_bon(const Policy& policy, const RewardModel& model, const Environment& env,
                      std::span<const Task> tasks, std::span<const int> ns, std::uint64_t seed,
                      double temperature) {
  BonCurve c;
  c.ns.assign(ns.begin(), ns.end());
  c.model.assign(ns.size(), 0.0);
  c.random.assign(ns.size(), 0.0);
  c.oracle.assign(ns.size(), 0.0);
  if (ns.empty() || tasks.empty()) return c;
  int n_max = *std::max_element(ns.begin(), ns.end());
  for (const auto& task : tasks) {
    auto samples = bon_samples(policy, env, task, n_max, seed, temperature);
    std::vector<double> scores;
    std::vector<double> outcomes;
    for (const auto& s : samples) {
      scores.push_back(trajectory_score(model, env, s));
      outcomes.push_back(s.outcome);
      c.env_steps += s.length();
    }
    for (std::size_t k = 0; k < ns.size(); ++k) {
      auto n = static_cast<std::size_t>(ns[k]);
      c.model[k] += outcomes[select_best(std::span(scores).first(n))];
      c.random[k] += outcomes[random_selection(ns[k], seed, task)];
      c.oracle[k] += outcomes[select_best(std::span(outcomes).first(n))];
    }
  }
  for (std::size_t k = 0; k < ns.size(); ++k) {
    c.model[k] /= static_cast<double>(tasks.size());
    c.random[k] /= static_cast<double>(tasks.size());
    c.oracle[k] /= static_cast<double>(tasks.size());
  }
  return c;
}

BeamEval evaluate_beam(const Policy& policy, const StepScorer& scorer, const Environment& env,
                       std::span<const Task> tasks, const SearchConfig& config, std::uint64_t seed) {
  BeamEval e;
  if (tasks.empty()) return e;
  for (const auto& task : tasks) {
    auto r = beam_search(policy, scorer, env, task, config, derive_seed(seed, hash_string(task.id)));
    e.success += r.best.outcome;
    e.env_steps += r.expansions;
  }
  e.success /= static_cast<double>(tasks.size());
  return e;
}

double evaluate_greedy(const Policy& policy, const Environment& env, std::span<const Task> tasks,
                       std::uint64_t seed) {
  return greedy_score(policy, env, tasks, seed);
}

ValueHistogram export_value_histogram(const RewardModel& model, const Environment& env,
                                      std::span<const Trajectory> trajectories, int buckets,
                                      double threshold) {
  if (buckets < 2) throw Error(ErrorKind::Config, "histogram needs at least 2 buckets");
  ValueHistogram h;
  auto nb = static_cast<std::size_t>(buckets);
  for (std::size_t i = 0; i <= nb; ++i) h.edges.push_back(static_cast<double>(i) / buckets);
  h.success.assign(nb, 0);
  h.failure.assign(nb, 0);
  if (trajectories.empty()) {
    h.warnings.push_back("no trajectories");
    h.edges.clear();
    h.success.clear();
    h.failure.clear();
    return h;
  }
  double sum_s = 0.0;
  double sum_f = 0.0;
  std::uint64_t n_s = 0;
  std::uint64_t n_f = 0;
  for (const auto& t : trajectories) {
    if (!t.final_state.terminal) throw Error(ErrorKind::Data, "histogram needs finished trajectories");
    bool success = t.outcome >= threshold;
    for (const auto& s : score_trajectory(model, env, t)) {
      double q = std::clamp(s.q, 0.0, 1.0);
      auto b = std::min(nb - 1, static_cast<std::size_t>(q * buckets));
      (success ? h.success : h.failure)[b] += 1;
      (success ? sum_s : sum_f) += s.q;
      (success ? n_s : n_f) += 1;
    }
  }
  if (n_s == 0) h.warnings.push_back("no success trajectories");
  if (n_f == 0) h.warnings.push_back("no failure trajectories");
  h.success_mean = n_s > 0 ? sum_s / static_cast<double>(n_s) : 0.0;
  h.failure_mean = n_f > 0 ? sum_f / static_cast<double>(n_f) : 0.0;
  return h;
}

std::string histogram_csv(const ValueHistogram& h) {
  std::string out = "lower,upper,success,failure\n";
  for (std::size_t i = 0; i < h.success.size(); ++i) {
    out += fmt::format("{},{},{},{}\n", h.edges[i], h.edges[i + 1], h.success[i], h.failure[i]);
  }
  return out;
}

std::filesystem::path run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  auto env = make_environment(spec.env);
  auto split = split_tasks(*env, spec.tasks);
  auto path = out_dir / "metrics.jsonl";
  MetricsWriter metrics(path);
  auto record = [&](const std::string& metric, double x, double y, std::int64_t seed) {
    metrics.write(MetricsRecord{spec.name, metric, x, y, seed});
  };
  std::int64_t current = spec.seeds.front();
  try {
    for (auto seed : spec.seeds) {
      current = seed;
      auto s = useed(seed);
      Policy policy = initial_policy(*env, split.train, spec.policy, s);
      CostLedger collect_ledger;
      auto trajectories = collect_trajectories(policy, *env, split.train, spec.per_task,
                                               derive_seed(s, 0x636f6cULL), collect_ledger);
      double success = 0.0;
      for (const auto& t : trajectories) success += t.outcome >= spec.label.threshold ? 1.0 : 0.0;
      record("train_success_rate", 0, success / static_cast<double>(trajectories.size()), seed);

      TrainConfig tc = spec.train;
      tc.seed = derive_seed(s, 0x747263ULL);
      CostLedger label_ledger;
      RewardModel model = initial_model(*env, spec.model, s);
      TrainResult trained;
      if (spec.label.method == "mc") {
        auto labels = estimate_mc(policy, *env, trajectories, spec.label.n_mc, spec.label.threshold,
                                  label_ledger, derive_seed(s, 0x6d63ULL));
        trained = train_on_labels(std::move(model), *env, trajectories, labels, tc);
      } else {
        trained = train(std::move(model), *env, trajectories, tc, spec.model.variant, label_ledger);
      }
      std::map<int, std::vector<const LossReport*>> by_epoch;
      for (const auto& l : trained.losses) by_epoch[l.epoch].push_back(&l);
      for (const auto& [epoch, reports] : by_epoch) {
        double lq = 0.0;
        double la = 0.0;
        double total = 0.0;
        for (const auto* r : reports) {
          lq += r->l_q;
          la += r->l_a;
          total += r->total;
        }
        double n = static_cast<double>(reports.size());
        record("loss_q", epoch, lq / n, seed);
        record("loss_a", epoch, la / n, seed);
        record("loss_total", epoch, total / n, seed);
      }

      std::uint64_t search_steps = 0;
      double greedy = 0.0;
      for (const auto& t : split.eval) {
        auto g = greedy_decode(policy, *env, t, s);
        greedy += g.outcome;
        search_steps += g.length();
      }
      record("greedy_success", 0, split.eval.empty() ? 0.0 : greedy / split.eval.size(), seed);
      if (!spec.bon_ns.empty()) {
        auto curve = evaluate_bon(policy, trained.model, *env, split.eval, spec.bon_ns, s,
                                  spec.search.sample_temperature);
        for (std::size_t k = 0; k < curve.ns.size(); ++k) {
          record(fmt::format("bon_{}", to_string(spec.model.variant)), curve.ns[k], curve.model[k], seed);
          record("bon_random", curve.ns[k], curve.random[k], seed);
          record("bon_oracle", curve.ns[k], curve.oracle[k], seed);
        }
        search_steps += curve.env_steps;
      }
      for (auto [n, m] : spec.beam_points) {
        SearchConfig c = spec.search;
        c.beam_n = n;
        c.expand_m = m;
        auto beam = evaluate_beam(policy, model_scorer(trained.model, *env), *env, split.eval, c, s);
        record(fmt::format("beam_success@{}x{}", n, m), n, beam.success, seed);
        search_steps += beam.env_steps;
      }

      auto eval_trajectories = rollout_batch(policy, *env, split.eval, 1, derive_seed(s, 0x68697374ULL));
      for (const auto& t : eval_trajectories) search_steps += t.length();
      auto hist = export_value_histogram(trained.model, *env, eval_trajectories,
                                         spec.histogram_buckets, spec.label.threshold);
      record("value_mean_success", 0, hist.success_mean, seed);
      record("value_mean_failure", 0, hist.failure_mean, seed);

      std::uint64_t rl_steps = 0;
      if (spec.rl.enabled) {
        Policy start = spec.rl.init == "bc"
                           ? policy
                           : Policy::tabular(env->num_actions(), spec.rl.ppo.temperature);
        auto rl = ppo_train(start, &trained.model, *env, split.train, split.eval, spec.rl.ppo,
                            derive_seed(s, 0x726cULL));
        for (const auto& r : rl.reports) {
          record("rl_task_score", r.iteration, r.mean_task_score, seed);
          record("rl_rm_reward", r.iteration, r.mean_rm_reward, seed);
          record("rl_kl", r.iteration, r.kl_to_reference, seed);
        }
        rl_steps = rl.env_steps;
      }

      record("env_steps_collect", 0, static_cast<double>(collect_ledger.env_steps), seed);
      record("env_steps_label", 0, static_cast<double>(label_ledger.env_steps), seed);
      record("env_steps_search", 0, static_cast<double>(search_steps), seed);
      record("env_steps_rl", 0, static_cast<double>(rl_steps), seed);
      record("env_steps_total", 0,
             static_cast<double>(collect_ledger.env_steps + label_ledger.env_steps + search_steps +
                                 rl_steps),
             seed);
      metrics.flush();
    }
  } catch (...) {
    record("run_failed", 0, 1.0, current);
    metrics.flush();
    throw;
  }
  metrics.flush();
  return path;
}

std::string SummaryTable::render() const {
  std::vector<std::string> header{"metric"};
  for (double x : columns) header.push_back(fmt::format("x={}", x));
  std::vector<std::vector<std::string>> body;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> line{rows[r]};
    for (const auto& c : cells[r]) {
      line.push_back(c.count == 0 ? "-" : fmt::format("{:.4f} ± {:.4f}", c.mean, c.stddev));
    }
    body.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  auto display = [](const std::string& s) {
    // "±" is two bytes but one column.
    std::size_t n = 0;
    for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
    return n;
  };
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = display(header[i]);
  for (const auto& line : body) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], display(line[i]));
  }
  std::string out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      out += line[i];
      if (i + 1 < line.size()) out += std::string(width[i] - display(line[i]) + 2, ' ');
    }
    out += '\n';
  };
  emit(header);
  for (const auto& line : body) emit(line);
  return out;
}

std::string SummaryTable::csv() const {
  std::string out = "metric,x,mean,stddev,count\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = cells[r][c];
      if (cell.count == 0) continue;
      out += fmt::format("{},{},{},{},{}\n", rows[r], columns[c], cell.mean, cell.stddev, cell.count);
    }
  }
  return out;
}

SummaryTable summarize(std::span<const std::filesystem::path> metrics_files) {
  // experiment -> seed -> (metric, x) -> y
  std::map<std::string, std::map<std::int64_t, std::map<std::pair<std::string, double>, double>>> data;
  for (const auto& file : metrics_files) {
    for (const auto& r : read_metrics(file)) {
      auto& cell = data[r.experiment][r.seed];
      if (!cell.emplace(std::make_pair(r.metric, r.x), r.y).second) {
        throw Error(ErrorKind::Aggregation,
                    fmt::format("duplicate record {}/{} x={} seed={}", r.experiment, r.metric, r.x, r.seed));
      }
    }
  }
  SummaryTable t;
  std::set<double> xs;
  std::map<std::string, std::map<double, std::vector<double>>> values;
  for (const auto& [experiment, seeds] : data) {
    const auto& reference = seeds.begin()->second;
    for (const auto& [seed, cells] : seeds) {
      bool same = cells.size() == reference.size() &&
                  std::equal(cells.begin(), cells.end(), reference.begin(),
                             [](const auto& a, const auto& b) { return a.first == b.first; });
      if (!same) {
        throw Error(ErrorKind::Aggregation,
                    fmt::format("seed {} of '{}' reports different metric keys than seed {}", seed,
                                experiment, seeds.begin()->first));
      }
      for (const auto& [key, y] : cells) {
        values[experiment + "/" + key.first][key.second].push_back(y);
        xs.insert(key.second);
      }
    }
  }
  t.columns.assign(xs.begin(), xs.end());
  for (const auto& [row, by_x] : values) {
    t.rows.push_back(row);
    std::vector<SummaryTable::Cell> line(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      auto it = by_x.find(t.columns[c]);
      if (it == by_x.end()) continue;
      const auto& v = it->second;
      double mean = 0.0;
      for (double y : v) mean += y;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double y : v) var += (y - mean) * (y - mean);
      double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      line[c] = SummaryTable::Cell{mean, sd, v.size()};
    }
    t.cells.push_back(std::move(line));
  }
  return t;
}

}  // namespace agentprm
