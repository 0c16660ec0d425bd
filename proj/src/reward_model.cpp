#include "agentprm/reward_model.hpp"

#include <algorithm>
#include <cmath>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::AgentPrm: return "agentprm";
    case Variant::Pvm: return "pvm";
    case Variant::Orm: return "orm";
  }
  return "?";
}

std::string_view to_string(Backend b) { return b == Backend::Tabular ? "tabular" : "mlp"; }

Variant parse_variant(std::string_view s) {
  if (s == "agentprm") return Variant::AgentPrm;
  if (s == "pvm") return Variant::Pvm;
  if (s == "orm") return Variant::Orm;
  throw Error(ErrorKind::Config, "unknown model variant '" + std::string(s) + "'");
}

Backend parse_backend(std::string_view s) {
  if (s == "tabular") return Backend::Tabular;
  if (s == "mlp") return Backend::Mlp;
  throw Error(ErrorKind::Config, "unknown model backend '" + std::string(s) + "'");
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Mc: return "mc";
    case LabelSource::TdGae: return "td_gae";
    case LabelSource::Pvm: return "pvm";
  }
  return "?";
}

LabelSource parse_label_source(std::string_view s) {
  if (s == "mc") return LabelSource::Mc;
  if (s == "td_gae") return LabelSource::TdGae;
  if (s == "pvm") return LabelSource::Pvm;
  throw Error(ErrorKind::Data, "unknown label source '" + std::string(s) + "'");
}

RewardModel RewardModel::tabular(Variant variant) {
  RewardModel m;
  m.variant_ = variant;
  m.backend_ = Backend::Tabular;
  return m;
}

RewardModel RewardModel::mlp(Variant variant, std::size_t input_dim, std::size_t hidden,
                             std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0) throw Error(ErrorKind::Config, "mlp dimensions must be positive");
  std::vector<double> params(hidden * input_dim + 2 * hidden + 1, 0.0);
  Rng rng(derive_seed(seed, 0x6d6c70ULL));
  double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  for (std::size_t i = 0; i < hidden * input_dim; ++i) params[i] = (2.0 * rng.uniform() - 1.0) * a1;
  double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  std::size_t w2 = hidden * input_dim + hidden;
  for (std::size_t j = 0; j < hidden; ++j) params[w2 + j] = (2.0 * rng.uniform() - 1.0) * a2;
  return mlp_from_parameters(variant, input_dim, hidden, std::move(params));
}

RewardModel RewardModel::mlp(Variant variant, const Environment& env, std::size_t hidden,
                             std::uint64_t seed) {
  return mlp(variant, input_dim(env), hidden, seed);
}

RewardModel RewardModel::mlp_from_parameters(Variant variant, std::size_t input_dim,
                                             std::size_t hidden, std::vector<double> params) {
  if (params.size() != hidden * input_dim + 2 * hidden + 1) {
    throw Error(ErrorKind::Config, "mlp parameter count does not match its dimensions");
  }
  RewardModel m;
  m.variant_ = variant;
  m.backend_ = Backend::Mlp;
  m.input_dim_ = input_dim;
  m.hidden_ = hidden;
  m.params_ = std::move(params);
  return m;
}

std::size_t RewardModel::input_dim(const Environment& env) {
  return env.state_feature_dim() + kObservationBuckets + static_cast<std::size_t>(env.num_actions()) + 1;
}

ModelInput RewardModel::encode(const Environment& env, const EnvState& state, Action action) const {
  ModelInput in;
  in.key = combine(env.model_key(state), static_cast<std::uint64_t>(action.id + 1));
  if (backend_ == Backend::Tabular) return in;

  in.features = env.state_features(state);
  std::size_t base = in.features.size();
  in.features.resize(input_dim(env), 0.0);
  std::size_t n = state.observations.size();
  std::size_t window = std::min(n, kObservationWindow);
  for (std::size_t i = n - window; i < n; ++i) {
    std::size_t bucket = hash_string(state.observations[i]) % kObservationBuckets;
    in.features[base + bucket] += 1.0 / static_cast<double>(kObservationWindow);
  }
  std::size_t slot = action.id == kBeginAction.id ? static_cast<std::size_t>(env.num_actions())
                                                   : static_cast<std::size_t>(action.id);
  in.features[base + kObservationBuckets + slot] = 1.0;
  if (in.features.size() != input_dim_) {
    throw Error(ErrorKind::Config, "feature map dimension " + std::to_string(in.features.size()) +
                                       " does not match the model input dimension " +
                                       std::to_string(input_dim_));
  }
  return in;
}

double RewardModel::predict(const ModelInput& input) const {
  if (backend_ == Backend::Tabular) {
    auto it = table_.find(input.key);
    return it == table_.end() ? kTabularDefault : it->second;
  }
  if (input.features.size() != input_dim_) {
    throw Error(ErrorKind::Config, "feature map dimension does not match the model");
  }
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  double z = w2[hidden_];
  for (std::size_t j = 0; j < hidden_; ++j) {
    double a = b1[j];
    const double* row = w1 + j * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) a += row[i] * input.features[i];
    z += w2[j] * std::tanh(a);
  }
  return sigmoid(z);
}

double RewardModel::score(const Environment& env, const EnvState& state, Action action) const {
  return predict(encode(env, state, action));
}

void RewardModel::accumulate_gradient(const ModelInput& input, double coeff, Gradient& grad) const {
  if (backend_ == Backend::Tabular) {
    grad.sparse[input.key] += coeff;
    return;
  }
  if (grad.dense.empty()) grad.dense.assign(params_.size(), 0.0);
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  std::vector<double> h(hidden_);
  double z = w2[hidden_];
  for (std::size_t j = 0; j < hidden_; ++j) {
    double a = b1[j];
    const double* row = w1 + j * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) a += row[i] * input.features[i];
    h[j] = std::tanh(a);
    z += w2[j] * h[j];
  }
  double y = sigmoid(z);
  double dz = coeff * y * (1.0 - y);
  double* g_w1 = grad.dense.data();
  double* g_b1 = g_w1 + hidden_ * input_dim_;
  double* g_w2 = g_b1 + hidden_;
  g_w2[hidden_] += dz;
  for (std::size_t j = 0; j < hidden_; ++j) {
    g_w2[j] += dz * h[j];
    double da = dz * w2[j] * (1.0 - h[j] * h[j]);
    g_b1[j] += da;
    double* g_row = g_w1 + j * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) g_row[i] += da * input.features[i];
  }
}

StepScore score_step(const RewardModel& model, const Environment& env, const EnvState& state,
                     Action action) {
  return StepScore{model.score(env, state, action), state.step_index};
}

std::vector<StepScore> score_trajectory(const RewardModel& model, const Environment& env,
                                        const Trajectory& trajectory) {
  std::vector<StepScore> out;
  out.reserve(trajectory.steps.size());
  for (const auto& step : trajectory.steps) out.push_back(score_step(model, env, step.state, step.action));
  return out;
}

std::vector<LabeledStep> make_targets_pvm(std::span<const Trajectory> trajectories) {
  std::vector<LabeledStep> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (std::size_t t = 0; t < trajectories[i].steps.size(); ++t) {
      out.push_back(LabeledStep{i, static_cast<int>(t), trajectories[i].outcome, 0.0, LabelSource::Pvm});
    }
  }
  return out;
}

std::vector<OutcomeTarget> make_targets_orm(std::span<const Trajectory> trajectories) {
  std::vector<OutcomeTarget> out;
  out.reserve(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) out.push_back(OutcomeTarget{i, trajectories[i].outcome});
  return out;
}

}  // namespace agentprm
