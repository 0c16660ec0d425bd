#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "agentprm/error.hpp"
#include "agentprm/harness.hpp"
#include "agentprm/random.hpp"

namespace fs = std::filesystem;
using namespace agentprm;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::int64_t seed = 0;
  std::string out = "out";
};

struct Context {
  ExperimentSpec spec;
  std::unique_ptr<Environment> env;
  TaskSplit split;
  std::uint64_t seed = 0;
  fs::path out;
};

Context load(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  Context c;
  c.spec = load_experiment(g.config);
  c.env = make_environment(c.spec.env);
  c.split = split_tasks(*c.env, c.spec.tasks);
  c.seed = static_cast<std::uint64_t>(g.seed);
  c.out = g.out;
  fs::create_directories(c.out);
  return c;
}

class Metrics {
 public:
  Metrics(const Context& c, const std::string& file, std::int64_t seed)
      : writer_(c.out / file), name_(c.spec.name), seed_(seed) {}
  void add(const std::string& metric, double x, double y) {
    writer_.write(MetricsRecord{name_, metric, x, y, seed_});
  }
  ~Metrics() { writer_.flush(); }

 private:
  MetricsWriter writer_;
  std::string name_;
  std::int64_t seed_;
};

std::vector<Trajectory> load_collected(const Context& c) {
  return load_trajectories(*c.env, c.out / "trajectories.jsonl");
}

fs::path model_path(const Context& c, const std::string& variant) {
  return c.out / fmt::format("model_{}.ckpt", variant);
}

void cmd_collect(const Globals& g) {
  auto c = load(g);
  Policy policy = initial_policy(*c.env, c.split.train, c.spec.policy, c.seed);
  CostLedger ledger;
  auto trajectories = collect_trajectories(policy, *c.env, c.split.train, c.spec.per_task,
                                           derive_seed(c.seed, 0x636f6cULL), ledger);
  save_policy(policy, c.out / "policy.ckpt");
  save_task_manifest(c.split.train, c.out / "tasks_train.tsv");
  save_task_manifest(c.split.eval, c.out / "tasks_eval.tsv");
  save_trajectories(trajectories, c.out / "trajectories.jsonl");
  double success = 0.0;
  for (const auto& t : trajectories) success += t.outcome >= c.spec.label.threshold ? 1.0 : 0.0;
  Metrics m(c, "metrics_collect.jsonl", g.seed);
  m.add("trajectories", 0, static_cast<double>(trajectories.size()));
  m.add("train_success_rate", 0, success / static_cast<double>(trajectories.size()));
  m.add("env_steps", 0, static_cast<double>(ledger.env_steps));
}

void cmd_label(const Globals& g, const std::string& method, const std::string& model_file) {
  auto c = load(g);
  auto trajectories = load_collected(c);
  CostLedger ledger;
  std::vector<LabeledStep> labels;
  if (method == "mc") {
    auto policy = load_policy(c.out / "policy.ckpt");
    labels = estimate_mc(policy, *c.env, trajectories, c.spec.label.n_mc, c.spec.label.threshold,
                         ledger, derive_seed(c.seed, 0x6d63ULL));
  } else if (method == "td") {
    RewardModel model = model_file.empty() ? initial_model(*c.env, c.spec.model, c.seed)
                                           : load_model(model_file);
    labels = estimate_td_gae(model, *c.env, trajectories, c.spec.train.td, ledger);
  } else {
    throw Error(ErrorKind::Config, fmt::format("unknown label method '{}'", method));
  }
  save_labels(labels, c.out / fmt::format("labels_{}.jsonl", method));
  double q = 0.0;
  for (const auto& l : labels) q += l.q_target;
  Metrics m(c, fmt::format("metrics_label_{}.jsonl", method), g.seed);
  m.add("labeled_steps", 0, static_cast<double>(ledger.labeled_steps));
  m.add("env_steps", 0, static_cast<double>(ledger.env_steps));
  m.add("rollouts", 0, static_cast<double>(ledger.rollouts));
  m.add("mean_q_target", 0, labels.empty() ? 0.0 : q / static_cast<double>(labels.size()));
}

void cmd_train(const Globals& g, const std::string& variant_name, std::optional<double> beta,
               const std::string& labels_file) {
  auto c = load(g);
  auto variant = parse_variant(variant_name);
  auto trajectories = load_collected(c);
  TrainConfig tc = c.spec.train;
  if (beta) tc.beta = *beta;
  tc.seed = derive_seed(c.seed, 0x747263ULL);
  ModelSpec ms = c.spec.model;
  ms.variant = variant;
  auto checkpoints = c.out / "checkpoints";
  auto on_epoch = [&](int epoch, const RewardModel& model) {
    save_model(model, checkpoints / fmt::format("model_{}_epoch{}.ckpt", variant_name, epoch));
  };
  CostLedger ledger;
  TrainResult result;
  if (!labels_file.empty()) {
    auto labels = load_labels(labels_file);
    result = train_on_labels(initial_model(*c.env, ms, c.seed), *c.env, trajectories, labels, tc, on_epoch);
    result.model.set_variant(variant);
  } else {
    result = train(initial_model(*c.env, ms, c.seed), *c.env, trajectories, tc, variant, ledger, on_epoch);
  }
  save_model(result.model, model_path(c, variant_name));
  {
    std::ofstream log(c.out / fmt::format("train_log_{}.jsonl", variant_name), std::ios::binary);
    for (const auto& r : result.losses) {
      log << json{{"epoch", r.epoch}, {"batch", r.batch}, {"l_q", r.l_q}, {"l_a", r.l_a},
                  {"beta", r.beta}, {"total", r.total}}
                 .dump()
          << '\n';
    }
  }
  Metrics m(c, fmt::format("metrics_train_{}.jsonl", variant_name), g.seed);
  std::map<int, std::pair<double, int>> per_epoch;
  for (const auto& r : result.losses) {
    per_epoch[r.epoch].first += r.total;
    per_epoch[r.epoch].second += 1;
  }
  for (const auto& [epoch, acc] : per_epoch) m.add("loss_total", epoch, acc.first / acc.second);
  m.add("labeled_steps", 0, static_cast<double>(ledger.labeled_steps));
}

std::vector<int> parse_ns(const std::string& s) {
  std::vector<int> ns;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ns.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, fmt::format("bad --n entry '{}'", item));
    }
  }
  return ns;
}

void cmd_eval_bon(const Globals& g, const std::string& n_list, const std::string& variant) {
  auto c = load(g);
  auto ns = n_list.empty() ? c.spec.bon_ns : parse_ns(n_list);
  auto policy = load_policy(c.out / "policy.ckpt");
  auto model = load_model(model_path(c, variant));
  auto tasks = load_task_manifest(*c.env, c.out / "tasks_eval.tsv");
  auto curve = evaluate_bon(policy, model, *c.env, tasks, ns, c.seed, c.spec.search.sample_temperature);
  Metrics m(c, fmt::format("metrics_eval_bon_{}.jsonl", variant), g.seed);
  for (std::size_t k = 0; k < curve.ns.size(); ++k) {
    m.add(fmt::format("bon_{}", variant), curve.ns[k], curve.model[k]);
    m.add("bon_random", curve.ns[k], curve.random[k]);
    m.add("bon_oracle", curve.ns[k], curve.oracle[k]);
  }
  m.add("env_steps", 0, static_cast<double>(curve.env_steps));
}

void cmd_eval_beam(const Globals& g, int beam, int expand, const std::string& variant) {
  auto c = load(g);
  SearchConfig sc = c.spec.search;
  if (beam > 0) sc.beam_n = beam;
  if (expand > 0) sc.expand_m = expand;
  validate(sc);
  auto policy = load_policy(c.out / "policy.ckpt");
  auto model = load_model(model_path(c, variant));
  auto tasks = load_task_manifest(*c.env, c.out / "tasks_eval.tsv");
  std::ofstream trace(c.out / fmt::format("beam_trace_{}_{}x{}.jsonl", variant, sc.beam_n, sc.expand_m),
                      std::ios::binary);
  double success = 0.0;
  std::uint64_t steps = 0;
  for (const auto& task : tasks) {
    auto r = beam_search(policy, model, *c.env, task, sc, derive_seed(c.seed, hash_string(task.id)));
    success += r.best.outcome;
    steps += r.expansions;
    for (const auto& n : r.trace) {
      trace << json{{"task", task.id},     {"iteration", n.iteration}, {"id", n.id},
                    {"parent", n.parent},  {"action", c.env->action_name(n.action)},
                    {"score", n.score},    {"terminal", n.terminal},   {"retained", n.retained}}
                   .dump()
            << '\n';
    }
  }
  double n = tasks.empty() ? 1.0 : static_cast<double>(tasks.size());
  Metrics m(c, fmt::format("metrics_eval_beam_{}_{}x{}.jsonl", variant, sc.beam_n, sc.expand_m), g.seed);
  m.add(fmt::format("beam_success@{}x{}", sc.beam_n, sc.expand_m), sc.beam_n, success / n);
  m.add("greedy_success", 0, evaluate_greedy(policy, *c.env, tasks, c.seed));
  m.add("env_steps", 0, static_cast<double>(steps));
}

void cmd_rl(const Globals& g, const std::string& source_name) {
  auto c = load(g);
  PpoConfig pc = c.spec.rl.ppo;
  pc.reward_source = parse_reward_source(source_name);
  std::optional<RewardModel> model;
  if (pc.reward_source != RewardSource::EnvOracle) model = load_model(model_path(c, source_name));
  Policy start = c.spec.rl.init == "bc" ? load_policy(c.out / "policy.ckpt")
                                        : Policy::tabular(c.env->num_actions(), pc.temperature);
  auto checkpoints = c.out / "checkpoints";
  auto on_iteration = [&](const RlReport& r, const Policy& p) {
    if (r.iteration > 0 && r.iteration % 50 == 0) {
      save_policy(p, checkpoints / fmt::format("rl_{}_iter{}.ckpt", source_name, r.iteration));
    }
  };
  auto result = ppo_train(start, model ? &*model : nullptr, *c.env, c.split.train, c.split.eval, pc,
                          derive_seed(c.seed, 0x726cULL), on_iteration);
  save_policy(result.policy, c.out / fmt::format("rl_policy_{}.ckpt", source_name));
  Metrics m(c, fmt::format("metrics_rl_{}.jsonl", source_name), g.seed);
  for (const auto& r : result.reports) {
    m.add("rl_task_score", r.iteration, r.mean_task_score);
    m.add("rl_rm_reward", r.iteration, r.mean_rm_reward);
    m.add("rl_kl", r.iteration, r.kl_to_reference);
  }
  m.add("env_steps", 0, static_cast<double>(result.env_steps));
}

void cmd_histogram(const Globals& g, const std::string& variant, int buckets) {
  auto c = load(g);
  auto policy = load_policy(c.out / "policy.ckpt");
  auto model = load_model(model_path(c, variant));
  auto tasks = load_task_manifest(*c.env, c.out / "tasks_eval.tsv");
  auto trajectories = rollout_batch(policy, *c.env, tasks, 1, derive_seed(c.seed, 0x68697374ULL));
  auto h = export_value_histogram(model, *c.env, trajectories,
                                  buckets > 0 ? buckets : c.spec.histogram_buckets,
                                  c.spec.label.threshold);
  for (const auto& w : h.warnings) std::cerr << json{{"warning", w}}.dump() << '\n';
  write_file(c.out / fmt::format("histogram_{}.csv", variant), histogram_csv(h));
  Metrics m(c, fmt::format("metrics_histogram_{}.jsonl", variant), g.seed);
  for (std::size_t i = 0; i < h.success.size(); ++i) {
    m.add("histogram_success", h.edges[i], static_cast<double>(h.success[i]));
    m.add("histogram_failure", h.edges[i], static_cast<double>(h.failure[i]));
  }
  m.add("value_mean_success", 0, h.success_mean);
  m.add("value_mean_failure", 0, h.failure_mean);
}

void cmd_summarize(const Globals& g, const std::vector<std::string>& files) {
  if (files.empty()) throw Error(ErrorKind::Config, "summarize needs at least one metrics file");
  std::vector<fs::path> paths(files.begin(), files.end());
  auto table = summarize(paths);
  fs::create_directories(g.out);
  write_file(fs::path(g.out) / "summary.txt", table.render());
  write_file(fs::path(g.out) / "summary.csv", table.csv());
  std::cout << table.render();
}

void cmd_run(const Globals& g, bool seed_given) {
  if (g.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  auto spec = load_experiment(g.config);
  if (seed_given) spec.seeds = {g.seed};
  fs::create_directories(g.out);
  auto path = run_experiment(spec, g.out);
  std::cout << path.string() << '\n';
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    default: return 1;
  }
}

void report(const std::string& verb, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"verb", verb}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Process reward model pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", g.seed, "run seed");
  app.add_option("--out", g.out, "output directory");

  auto* collect = app.add_subcommand("collect", "behavior-clone a policy and collect trajectories");

  auto* label = app.add_subcommand("label", "estimate step labels");
  std::string method = "td";
  std::string label_model;
  label->add_option("--method", method, "mc or td")->check(CLI::IsMember({"mc", "td"}));
  label->add_option("--model", label_model, "model checkpoint used for td targets");

  auto* train = app.add_subcommand("train", "train a reward model");
  std::string variant = "agentprm";
  std::optional<double> beta;
  std::string labels_file;
  train->add_option("--variant", variant, "agentprm, pvm or orm")
      ->check(CLI::IsMember({"agentprm", "pvm", "orm"}));
  train->add_option("--beta", beta, "weight of the advantage loss");
  train->add_option("--labels", labels_file, "train on fixed labels from this file");

  auto* bon = app.add_subcommand("eval-bon", "Best-of-N evaluation");
  std::string n_list;
  std::string bon_variant = "agentprm";
  bon->add_option("--n", n_list, "comma-separated sample counts");
  bon->add_option("--variant", bon_variant, "reward model variant");

  auto* beam = app.add_subcommand("eval-beam", "beam search evaluation");
  int beam_n = 0;
  int expand_m = 0;
  std::string beam_variant = "agentprm";
  beam->add_option("--beam", beam_n, "beams retained (N)");
  beam->add_option("--expand", expand_m, "actions expanded per beam (M)");
  beam->add_option("--variant", beam_variant, "reward model variant");

  auto* rl = app.add_subcommand("rl", "PPO fine-tuning with a reward model");
  std::string source = "agentprm";
  rl->add_option("--reward-source", source, "agentprm, pvm, orm or env-oracle")
      ->check(CLI::IsMember({"agentprm", "pvm", "orm", "env-oracle"}));

  auto* hist = app.add_subcommand("histogram", "per-step value histogram");
  std::string hist_variant = "agentprm";
  int buckets = 0;
  hist->add_option("--variant", hist_variant, "reward model variant");
  hist->add_option("--buckets", buckets, "bucket count");

  auto* sum = app.add_subcommand("summarize", "aggregate metrics files over seeds");
  std::vector<std::string> files;
  sum->add_option("files", files, "metrics files");

  auto* run = app.add_subcommand("run", "run a full experiment");

  std::string verb = "agentprm";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(verb, "usage", e.what());
    return 2;
  }
  verb = app.get_subcommands().front()->get_name();
  try {
    if (collect->parsed()) cmd_collect(g);
    if (label->parsed()) cmd_label(g, method, label_model);
    if (train->parsed()) cmd_train(g, variant, beta, labels_file);
    if (bon->parsed()) cmd_eval_bon(g, n_list, bon_variant);
    if (beam->parsed()) cmd_eval_beam(g, beam_n, expand_m, beam_variant);
    if (rl->parsed()) cmd_rl(g, source);
    if (hist->parsed()) cmd_histogram(g, hist_variant, buckets);
    if (sum->parsed()) cmd_summarize(g, files);
    if (run->parsed()) cmd_run(g, seed_opt->count() > 0);
  } catch (const Error& e) {
    report(verb, std::string(to_string(e.kind())), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report(verb, "internal", e.what());
    return 1;
  }
  return 0;
}
