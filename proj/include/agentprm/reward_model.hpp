#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agentprm/env.hpp"
#include "agentprm/policy.hpp"

namespace agentprm {

enum class Variant { AgentPrm, Pvm, Orm };
enum class Backend { Tabular, Mlp };

std::string_view to_string(Variant v);
std::string_view to_string(Backend b);
Variant parse_variant(std::string_view s);
Backend parse_backend(std::string_view s);

/// Encoded (state, action) pair: the tabular key and the dense feature vector.
struct ModelInput {
  std::uint64_t key = 0;
  std::vector<double> features;
};

struct StepScore {
  double q = 0.0;
  int step_index = 0;
};

/// Window of recent observations folded into the dense feature map.
inline constexpr std::size_t kObservationWindow = 3;
inline constexpr std::size_t kObservationBuckets = 8;

/// M_phi(s, a). Scoring is read-only; training code mutates the parameters
/// through the gradient interface below.
class RewardModel {
 public:
  struct Gradient {
    std::unordered_map<std::uint64_t, double> sparse;
    std::vector<double> dense;
  };

  static constexpr double kTabularDefault = 0.5;

  static RewardModel tabular(Variant variant);
  static RewardModel mlp(Variant variant, std::size_t input_dim, std::size_t hidden,
                         std::uint64_t seed);
  static RewardModel mlp(Variant variant, const Environment& env, std::size_t hidden,
                         std::uint64_t seed);

  /// Dimension of the dense feature map for `env`: state features, the
  /// observation bag and a one-hot action with a slot for the begin token.
  static std::size_t input_dim(const Environment& env);

  Variant variant() const { return variant_; }
  Backend backend() const { return backend_; }
  void set_variant(Variant v) { variant_ = v; }

  ModelInput encode(const Environment& env, const EnvState& state, Action action) const;
  double predict(const ModelInput& input) const;
  double score(const Environment& env, const EnvState& state, Action action) const;

  /// grad += coeff * d predict(input) / d phi.
  void accumulate_gradient(const ModelInput& input, double coeff, Gradient& grad) const;

  // Parameter access for optimizers, serialization and gradient checks.
  std::unordered_map<std::uint64_t, double>& table() { return table_; }
  const std::unordered_map<std::uint64_t, double>& table() const { return table_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t input_size() const { return input_dim_; }
  std::size_t hidden_size() const { return hidden_; }

  /// Rebuilds an mlp from raw parameters (checkpoint loading).
  static RewardModel mlp_from_parameters(Variant variant, std::size_t input_dim, std::size_t hidden,
                                         std::vector<double> params);

  bool operator==(const RewardModel&) const = default;

 private:
  Variant variant_ = Variant::AgentPrm;
  Backend backend_ = Backend::Tabular;
  std::unordered_map<std::uint64_t, double> table_;
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;  // W1 (hidden x input), b1, w2, b2
};

StepScore score_step(const RewardModel& model, const Environment& env, const EnvState& state,
                     Action action);

/// One score per action in order; the last entry is the trajectory-level
/// score used for Best-of-N.
std::vector<StepScore> score_trajectory(const RewardModel& model, const Environment& env,
                                        const Trajectory& trajectory);

/// Where a LabeledStep's targets came from.
enum class LabelSource { Mc, TdGae, Pvm };

std::string_view to_string(LabelSource s);
LabelSource parse_label_source(std::string_view s);

/// Per-step training target (Q-hat, A-hat) for step `step_index` of
/// trajectory `trajectory`.
struct LabeledStep {
  std::size_t trajectory = 0;
  int step_index = 0;
  double q_target = 0.0;
  double adv_target = 0.0;
  LabelSource source = LabelSource::TdGae;

  bool operator==(const LabeledStep&) const = default;
};

/// Every step of tau gets Q-hat = r(u, tau); A-hat is left at zero.
std::vector<LabeledStep> make_targets_pvm(std::span<const Trajectory> trajectories);

struct OutcomeTarget {
  std::size_t trajectory = 0;
  double target = 0.0;
};

/// One target per trajectory, equal to its outcome reward.
std::vector<OutcomeTarget> make_targets_orm(std::span<const Trajectory> trajectories);

}  // namespace agentprm
