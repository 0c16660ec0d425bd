#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentprm/craftdag.hpp"
#include "agentprm/gridnav.hpp"
#include "agentprm/inference.hpp"
#include "agentprm/io.hpp"
#include "agentprm/labeling.hpp"
#include "agentprm/policy.hpp"
#include "agentprm/reward_model.hpp"
#include "agentprm/rl_ppo.hpp"
#include "agentprm/training.hpp"

namespace agentprm {

struct EnvSpec {
  std::string family = "gridnav";
  GridNavConfig gridnav;
  CraftDagConfig craftdag;
};

std::unique_ptr<Environment> make_environment(const EnvSpec& spec);

struct TaskSpec {
  std::size_t train = 200;
  std::size_t eval = 50;
  std::uint64_t seed = 7;
};

struct PolicySpec {
  PolicyMode mode = PolicyMode::Tabular;
  double temperature = 1.0;
  /// Scripted demonstrations for behavior-cloning initialization; 0 keeps the
  /// uniform initial policy.
  std::size_t demos = 32;
  BehaviorCloningConfig bc;
};

struct ModelSpec {
  Variant variant = Variant::AgentPrm;
  Backend backend = Backend::Tabular;
  std::size_t hidden = 32;
};

struct LabelSpec {
  /// "td" trains with per-batch TD+GAE targets; "mc" trains on fixed
  /// Monte-Carlo labels.
  std::string method = "td";
  int n_mc = 16;
  double threshold = 1.0;
};

struct RlSpec {
  bool enabled = false;
  /// "uniform" or "bc".
  std::string init = "uniform";
  PpoConfig ppo;
};

struct ExperimentSpec {
  std::string name = "experiment";
  EnvSpec env;
  TaskSpec tasks;
  PolicySpec policy;
  int per_task = 4;  // trajectories collected per training task (N_TD)
  ModelSpec model;
  TrainConfig train;
  LabelSpec label;
  SearchConfig search;
  std::vector<int> bon_ns = {1, 2, 4, 8, 16, 32, 64};
  std::vector<std::pair<int, int>> beam_points = {{2, 2}, {4, 4}, {8, 8}};
  RlSpec rl;
  int histogram_buckets = 10;
  std::vector<std::int64_t> seeds = {0};
};

/// Strict parsing: unknown keys and out-of-range values are config errors.
ExperimentSpec parse_experiment(const nlohmann::json& j);
ExperimentSpec load_experiment(const std::filesystem::path& path);
void validate(const ExperimentSpec& spec);

/// Disjoint train and evaluation task sets, split by task-id hash.
struct TaskSplit {
  std::vector<Task> train;
  std::vector<Task> eval;
};
TaskSplit split_tasks(const Environment& env, const TaskSpec& spec);
bool is_eval_task(const Task& task);

/// Initial policy: uniform, or behavior-cloned on expert demonstrations.
Policy initial_policy(const Environment& env, std::span<const Task> train_tasks,
                      const PolicySpec& spec, std::uint64_t seed);

RewardModel initial_model(const Environment& env, const ModelSpec& spec, std::uint64_t seed);

/// BoN success on `tasks` for each n, under reward-model, random and
/// outcome-oracle selection over one shared draw of max(ns) samples per task.
struct BonCurve {
  std::vector<int> ns;
  std::vector<double> model;
  std::vector<double> random;
  std::vector<double> oracle;
  std::uint64_t env_steps = 0;
};
BonCurve evaluate_bon(const Policy& policy, const RewardModel& model, const Environment& env,
                      std::span<const Task> tasks, std::span<const int> ns, std::uint64_t seed,
                      double temperature);

struct BeamEval {
  double success = 0.0;
  std::uint64_t env_steps = 0;
};
BeamEval evaluate_beam(const Policy& policy, const StepScorer& scorer, const Environment& env,
                       std::span<const Task> tasks, const SearchConfig& config, std::uint64_t seed);

double evaluate_greedy(const Policy& policy, const Environment& env, std::span<const Task> tasks,
                       std::uint64_t seed);

struct ValueHistogram {
  std::vector<double> edges;  // buckets + 1 uniform edges on [0, 1]
  std::vector<std::uint64_t> success;
  std::vector<std::uint64_t> failure;
  double success_mean = 0.0;
  double failure_mean = 0.0;
  std::vector<std::string> warnings;
};

/// Per-step model scores partitioned by trajectory outcome (success means the
/// outcome reaches `threshold`).
ValueHistogram export_value_histogram(const RewardModel& model, const Environment& env,
                                      std::span<const Trajectory> trajectories, int buckets,
                                      double threshold = 1.0);
std::string histogram_csv(const ValueHistogram& h);

/// Executes collect, train and evaluate for every seed. Returns the metrics
/// file path. On a stage failure the metrics written so far are flushed, a
/// run_failed record is appended and the error is rethrown.
std::filesystem::path run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

struct SummaryTable {
  std::vector<std::string> rows;  // "experiment/metric"
  std::vector<double> columns;    // x values
  /// cells[r][c] = (mean, stddev, count); count 0 means absent.
  struct Cell {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
  };
  std::vector<std::vector<Cell>> cells;

  std::string render() const;
  std::string csv() const;
};

/// Aggregates over seeds. Seeds of one experiment must report the same
/// (metric, x) keys, else an aggregation error.
SummaryTable summarize(std::span<const std::filesystem::path> metrics_files);

}  // namespace agentprm
