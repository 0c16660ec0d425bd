#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/policy.hpp"
#include "agentprm/reward_model.hpp"

namespace agentprm {

inline constexpr int kCheckpointVersion = 1;

// Versioned text checkpoints. Doubles round-trip exactly.
void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);
void save_model(const RewardModel& model, const std::filesystem::path& path);
RewardModel load_model(const std::filesystem::path& path);

void write_policy(const Policy& policy, std::ostream& out);
Policy read_policy(std::istream& in);
void write_model(const RewardModel& model, std::ostream& out);
RewardModel read_model(std::istream& in);

/// One JSON object per line: task id, horizon, seed, actions, observations
/// and outcome.
void save_trajectories(std::span<const Trajectory> trajectories, const std::filesystem::path& path);
/// Rebuilds each trajectory by replaying its actions; a replay that disagrees
/// with the recorded observations is a data error.
std::vector<Trajectory> load_trajectories(const Environment& env, const std::filesystem::path& path);

void save_labels(std::span<const LabeledStep> labels, const std::filesystem::path& path);
std::vector<LabeledStep> load_labels(const std::filesystem::path& path);

/// Tab-separated: id, instruction, horizon.
void save_task_manifest(std::span<const Task> tasks, const std::filesystem::path& path);
std::vector<Task> load_task_manifest(const Environment& env, const std::filesystem::path& path);

struct MetricsRecord {
  std::string experiment;
  std::string metric;
  double x = 0.0;
  double y = 0.0;
  std::int64_t seed = 0;
};

/// Append-only metrics stream. Line 1 carries the creation timestamp, line 2
/// the schema, then one record per line.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRecord& record);
  void flush();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::set<std::string> keys_;
  std::unique_ptr<std::ofstream> out_;
};

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace agentprm
