#include "agentprm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "agentprm/error.hpp"
#include "agentprm/random.hpp"

namespace agentprm {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw Error(ErrorKind::Config, fmt::format("unknown optimizer '{}'", s));
}

std::string_view to_string(TargetCadence c) {
  return c == TargetCadence::PerBatch ? "per-batch" : "per-epoch";
}

TargetCadence parse_cadence(std::string_view s) {
  if (s == "per-batch") return TargetCadence::PerBatch;
  if (s == "per-epoch") return TargetCadence::PerEpoch;
  throw Error(ErrorKind::Config, fmt::format("unknown target cadence '{}'", s));
}

double default_learning_rate(Backend backend, OptimizerKind optimizer) {
  if (backend == Backend::Tabular) return optimizer == OptimizerKind::Sgd ? 2.0 : 0.05;
  return optimizer == OptimizerKind::Sgd ? 0.5 : 3e-3;
}

double loss_q(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw Error(ErrorKind::Data, fmt::format("loss_q needs equal non-empty inputs, got {} and {}",
                                             predictions.size(), targets.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double r = predictions[i] - targets[i];
    sum += 0.5 * r * r;
  }
  return sum / static_cast<double>(predictions.size());
}

double loss_a(std::span<const double> predictions, std::span<const LabeledStep> steps) {
  if (predictions.empty() || predictions.size() != steps.size()) {
    throw Error(ErrorKind::Data, fmt::format("loss_a needs equal non-empty inputs, got {} and {}",
                                             predictions.size(), steps.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    bool continues = i > 0 && steps[i].trajectory == steps[i - 1].trajectory;
    if (continues ? steps[i].step_index != steps[i - 1].step_index + 1
                  : steps[i].step_index != 0) {
      throw Error(ErrorKind::Data,
                  fmt::format("loss_a: step {} of trajectory {} is out of order",
                              steps[i].step_index, steps[i].trajectory));
    }
    double e = predictions[i] - steps[i].q_target;
    if (continues) e -= predictions[i - 1] - steps[i - 1].q_target;
    sum += 0.5 * e * e;
  }
  return sum / static_cast<double>(steps.size());
}

ObjectiveValue evaluate_objective(const RewardModel& model, std::span<const TrajectoryTargets> batch,
                                  double beta, bool advantage_loss, RewardModel::Gradient* grad) {
  std::size_t n_q = 0;
  std::size_t n_a = 0;
  for (const auto& t : batch) {
    if (t.inputs.size() != t.q_targets.size() || t.inputs.empty()) {
      throw Error(ErrorKind::Data, "trajectory targets do not match their inputs");
    }
    n_q += t.inputs.size() + (t.begin_input ? 1 : 0);
    n_a += t.inputs.size();
  }
  ObjectiveValue out;
  if (n_q == 0) return out;

  std::vector<double> residual;
  std::vector<double> coeff;
  for (const auto& t : batch) {
    std::size_t len = t.inputs.size();
    residual.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      residual[i] = model.predict(t.inputs[i]) - t.q_targets[i];
      out.l_q += 0.5 * residual[i] * residual[i];
    }
    // Pair residual e_t = r_t - r_{t-1}; at t = 0, q_{-1} cancels and e_0 = r_0.
    std::vector<double> pair(len);
    if (advantage_loss) {
      for (std::size_t i = 0; i < len; ++i) {
        pair[i] = residual[i] - (i == 0 ? 0.0 : residual[i - 1]);
        out.l_a += 0.5 * pair[i] * pair[i];
      }
    }
    double begin_residual = 0.0;
    if (t.begin_input) {
      begin_residual = model.predict(*t.begin_input) - t.begin_target;
      out.l_q += 0.5 * begin_residual * begin_residual;
    }
    if (grad == nullptr) continue;
    coeff.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      coeff[i] = residual[i] / static_cast<double>(n_q);
      if (advantage_loss) {
        double next = i + 1 < len ? pair[i + 1] : 0.0;
        coeff[i] += beta * (pair[i] - next) / static_cast<double>(n_a);
      }
      model.accumulate_gradient(t.inputs[i], coeff[i], *grad);
    }
    if (t.begin_input) {
      model.accumulate_gradient(*t.begin_input, begin_residual / static_cast<double>(n_q), *grad);
    }
  }
  out.l_q /= static_cast<double>(n_q);
  if (advantage_loss) out.l_a /= static_cast<double>(n_a);
  out.total = out.l_q + beta * out.l_a;
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double beta1, double beta2,
                     double epsilon)
    : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::Config, fmt::format("learning rate must be positive, got {}", learning_rate));
  }
}

void Optimizer::step(RewardModel& model, const RewardModel::Gradient& grad) {
  ++steps_;
  double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto update = [&](double g, double& m, double& v) {
    if (kind_ == OptimizerKind::Sgd) return lr_ * g;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g * g;
    return lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
  };

  if (model.backend() == Backend::Tabular) {
    // Sorted keys keep the update order independent of hash-map iteration.
    std::vector<std::uint64_t> keys;
    keys.reserve(grad.sparse.size());
    for (const auto& [k, g] : grad.sparse) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    auto& table = model.table();
    for (auto k : keys) {
      auto& mv = sparse_moments_[k];
      auto it = table.find(k);
      double current = it == table.end() ? RewardModel::kTabularDefault : it->second;
      table[k] = std::clamp(current - update(grad.sparse.at(k), mv.first, mv.second), 0.0, 1.0);
    }
    return;
  }
  if (grad.dense.empty()) return;
  auto& p = model.parameters();
  if (m_.empty()) {
    m_.assign(p.size(), 0.0);
    v_.assign(p.size(), 0.0);
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= update(grad.dense[i], m_[i], v_[i]);
}

std::vector<ModelInput> encode_trajectory(const RewardModel& model, const Environment& env,
                                          const Trajectory& trajectory) {
  std::vector<ModelInput> out;
  out.reserve(trajectory.steps.size());
  for (const auto& s : trajectory.steps) out.push_back(model.encode(env, s.state, s.action));
  return out;
}

namespace {

void check_config(const TrainConfig& c) {
  if (c.epochs < 1) throw Error(ErrorKind::Config, "epochs must be >= 1");
  if (c.batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
  if (!(c.beta >= 0.0)) throw Error(ErrorKind::Config, "beta must be >= 0");
  if (c.td.gamma < 0.0 || c.td.gamma > 1.0 || c.td.lambda < 0.0 || c.td.lambda > 1.0) {
    throw Error(ErrorKind::Config, "gamma and lambda must lie in [0, 1]");
  }
}

struct Encoded {
  std::vector<ModelInput> steps;
  std::optional<ModelInput> begin;
};

// Runs the epoch/batch loop; `make_targets` builds the frozen targets for one
// trajectory index at the time it is called.
template <typename MakeTargets>
TrainResult run_loop(RewardModel model, std::size_t count, const TrainConfig& config, double beta,
                     bool advantage_loss, bool per_epoch_targets, MakeTargets make_targets,
                     const EpochCallback& on_epoch) {
  double lr = config.learning_rate.value_or(default_learning_rate(model.backend(), config.optimizer));
  Optimizer opt(config.optimizer, lr, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  TrainResult result{std::move(model), {}};
  RewardModel& m = result.model;
  std::vector<std::size_t> order(count);
  std::vector<TrajectoryTargets> cached;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 0x747261696eULL, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    if (per_epoch_targets) {
      cached.clear();
      for (std::size_t i = 0; i < count; ++i) cached.push_back(make_targets(m, i));
    }
    int batch_index = 0;
    for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(count, start + static_cast<std::size_t>(config.batch_size));
      std::vector<TrajectoryTargets> batch;
      batch.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        batch.push_back(per_epoch_targets ? cached[order[j]] : make_targets(m, order[j]));
      }
      RewardModel::Gradient grad;
      auto value = evaluate_objective(m, batch, beta, advantage_loss, &grad);
      if (!std::isfinite(value.l_q) || !std::isfinite(value.l_a) || !std::isfinite(value.total)) {
        throw Error(ErrorKind::Divergence,
                    fmt::format("non-finite loss at epoch {} batch {}: l_q={} l_a={} total={}", epoch,
                                batch_index, value.l_q, value.l_a, value.total));
      }
      result.losses.push_back(
          LossReport{epoch, batch_index, value.l_q, value.l_a, beta, value.total});
      opt.step(m, grad);
      ++batch_index;
    }
    if (on_epoch) on_epoch(epoch, m);
  }
  return result;
}

}  // namespace

TrainResult train(RewardModel model, const Environment& env,
                  std::span<const Trajectory> trajectories, const TrainConfig& config,
                  Variant variant, CostLedger& ledger, const EpochCallback& on_epoch) {
  check_config(config);
  if (trajectories.empty()) throw Error(ErrorKind::Data, "no trajectories to train on");
  model.set_variant(variant);
  bool begin_token = variant == Variant::AgentPrm && config.td.v0_mode == V0Mode::LearnedBeginToken;
  std::vector<Encoded> encoded;
  encoded.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    if (t.steps.empty()) throw Error(ErrorKind::Data, "cannot train on an empty trajectory");
    if (!t.final_state.terminal) {
      throw Error(ErrorKind::Data, fmt::format("trajectory for '{}' has no outcome", t.task.id));
    }
    Encoded e;
    if (variant == Variant::Orm) {
      e.steps.push_back(model.encode(env, t.steps.back().state, t.steps.back().action));
    } else {
      e.steps = encode_trajectory(model, env, t);
    }
    if (begin_token) e.begin = model.encode(env, t.steps.front().state, kBeginAction);
    encoded.push_back(std::move(e));
  }

  if (variant != Variant::AgentPrm) {
    auto targets = [&](const RewardModel&, std::size_t i) {
      TrajectoryTargets t;
      t.inputs = encoded[i].steps;
      t.q_targets.assign(t.inputs.size(), trajectories[i].outcome);
      return t;
    };
    for (const auto& t : trajectories) ledger.labeled_steps += variant == Variant::Orm ? 1 : t.length();
    return run_loop(std::move(model), trajectories.size(), config, 0.0, false, false, targets,
                    on_epoch);
  }

  auto targets = [&](const RewardModel& m, std::size_t i) {
    TrajectoryTargets t;
    t.inputs = encoded[i].steps;
    std::vector<double> q;
    q.reserve(t.inputs.size());
    for (const auto& in : t.inputs) q.push_back(m.predict(in));
    double v0 = encoded[i].begin ? m.predict(*encoded[i].begin) : 0.0;
    auto g = td_gae_targets(q, v0, trajectories[i].outcome, config.td);
    t.q_targets = std::move(g.q_targets);
    if (encoded[i].begin) {
      t.begin_input = encoded[i].begin;
      t.begin_target = t.q_targets.front();
    }
    ledger.labeled_steps += q.size();
    return t;
  };
  return run_loop(std::move(model), trajectories.size(), config, config.beta, true,
                  config.cadence == TargetCadence::PerEpoch, targets, on_epoch);
}

TrainResult train_on_labels(RewardModel model, const Environment& env,
                            std::span<const Trajectory> trajectories,
                            std::span<const LabeledStep> labels, const TrainConfig& config,
                            const EpochCallback& on_epoch) {
  check_config(config);
  if (trajectories.empty()) throw Error(ErrorKind::Data, "no trajectories to train on");
  std::vector<TrajectoryTargets> fixed(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    fixed[i].inputs = encode_trajectory(model, env, trajectories[i]);
    fixed[i].q_targets.assign(fixed[i].inputs.size(), std::nan(""));
  }
  for (const auto& l : labels) {
    if (l.trajectory >= fixed.size() || l.step_index < 0 ||
        static_cast<std::size_t>(l.step_index) >= fixed[l.trajectory].q_targets.size()) {
      throw Error(ErrorKind::Data, fmt::format("label for trajectory {} step {} has no matching step",
                                               l.trajectory, l.step_index));
    }
    fixed[l.trajectory].q_targets[static_cast<std::size_t>(l.step_index)] = l.q_target;
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    for (double q : fixed[i].q_targets) {
      if (std::isnan(q)) {
        throw Error(ErrorKind::Data, fmt::format("trajectory {} has unlabeled steps", i));
      }
    }
  }
  auto targets = [&](const RewardModel&, std::size_t i) { return fixed[i]; };
  return run_loop(std::move(model), trajectories.size(), config, config.beta, true, false, targets,
                  on_epoch);
}

}  // namespace agentprm
