#pragma once

// Online (SAC, DQN) and offline (CQL) training loops. Offline training
// reads transitions only; it never constructs or steps an environment.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrm/env.hpp"
#include "rrm/marl/act.hpp"
#include "rrm/marl/agent_nets.hpp"
#include "rrm/marl/config.hpp"
#include "rrm/marl/losses.hpp"
#include "rrm/marl/replay.hpp"

namespace rrm::marl {

struct StepStats {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double cql_penalty = 0.0;
};

struct EvalPoint {
  double rsum = 0.0;
  double rperc5 = 0.0;
  double rscore = 0.0;
};

struct CurveRow {
  int iteration = 0;
  std::optional<EvalPoint> eval;
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double cql_penalty_mean = 0.0;
};

using Evaluator = std::function<EvalPoint(const AgentNets&)>;

// Owns the networks and their optimizers and applies one gradient step:
// critic update, then policy update against the updated critic, then a
// Polyak blend of the target critics.
class Learner {
 public:
  Learner(const TrainerConfig& cfg, AgentNets nets) : cfg_(cfg), nets_(std::move(nets)) {
    for (const auto& c : nets_.critics) critic_opt_.push_back(nn::AdamState::for_net(c, cfg_.critic_lr));
    for (const auto& p : nets_.policies) policy_opt_.push_back(nn::AdamState::for_net(p, cfg_.actor_lr));
  }

  const AgentNets& nets() const { return nets_; }
  AgentNets release() { return std::move(nets_); }
  long long steps() const { return steps_; }

  StepStats gradient_step(const Batch& batch) {
    StepStats stats;
    std::optional<double> alpha;
    if (is_offline(cfg_.algo)) alpha.emplace(cfg_.cql_alpha);
    switch (nets_.scope()) {
      case Scope::kCentralized: stats = centralized_step(batch, alpha); break;
      case Scope::kIndependent: stats = independent_step(batch, alpha); break;
      case Scope::kCtde: stats = ctde_step(batch, alpha); break;
    }
    for (std::size_t k = 0; k < nets_.critics.size(); ++k) {
      nn::polyak_update(nets_.target_critics[k], nets_.critics[k], cfg_.polyak_tau);
    }
    ++steps_;
    return stats;
  }

 private:
  void check_finite(double loss, const char* what) const {
    if (!std::isfinite(loss)) {
      throw NumericalError(std::string("non-finite ") + what + " at gradient step " +
                           std::to_string(steps_));
    }
  }

  void apply_critic(std::size_t k, const nn::Gradients& g) {
    nn::adam_step(nets_.critics[k], g, critic_opt_[k]);
  }

  double improve_policy(std::size_t k, const Matrix& inputs) {
    const Matrix q = nn::predict(nets_.critics[k], inputs);
    const auto loss = policy_improvement_loss(nets_.policies[k], inputs, q, cfg_.entropy_coeff);
    check_finite(loss.loss, "policy loss");
    nn::adam_step(nets_.policies[k], loss.grads[0], policy_opt_[k]);
    return loss.loss;
  }

  // Soft (or max, for DQN) next-state value under target critic k.
  Vector next_value(std::size_t k, const Matrix& next_inputs) const {
    const Matrix q_next = nn::predict(nets_.target_critics[k], next_inputs);
    if (nets_.policies.empty()) return greedy_value(q_next);
    return soft_value(q_next, nn::predict(nets_.policies[k], next_inputs), cfg_.target_entropy_coeff);
  }

  StepStats centralized_step(const Batch& batch, std::optional<double> alpha) {
    StepStats stats;
    const Matrix s = batch.state();
    const Vector y = td_targets(batch.reward, batch.not_done, next_value(0, batch.next_state()),
                                cfg_.discount);
    const auto joint = batch.joint_actions(nets_.codec());
    const auto loss = critic_td_loss(nets_.critics[0], s, joint, y, alpha);
    check_finite(loss.loss, "critic loss");
    apply_critic(0, loss.grads[0]);
    stats.critic_loss = loss.loss;
    stats.cql_penalty = loss.penalty_mean;
    if (!nets_.policies.empty()) stats.policy_loss = improve_policy(0, s);
    return stats;
  }

  StepStats independent_step(const Batch& batch, std::optional<double> alpha) {
    StepStats stats;
    for (std::size_t i = 0; i < nets_.critics.size(); ++i) {
      const Vector y =
          td_targets(batch.reward, batch.not_done, next_value(i, batch.next_obs[i]), cfg_.discount);
      const auto loss = critic_td_loss(nets_.critics[i], batch.obs[i], batch.actions[i], y, alpha);
      check_finite(loss.loss, "critic loss");
      apply_critic(i, loss.grads[0]);
      stats.critic_loss += loss.loss;
      stats.cql_penalty += loss.penalty_mean;
    }
    for (std::size_t i = 0; i < nets_.policies.size(); ++i) {
      stats.policy_loss += improve_policy(i, batch.obs[i]);
    }
    return stats;
  }

  StepStats ctde_step(const Batch& batch, std::optional<double> alpha) {
    StepStats stats;
    Vector next = Vector::Zero(batch.size());
    for (std::size_t i = 0; i < nets_.critics.size(); ++i) next += next_value(i, batch.next_obs[i]);
    const Vector y = td_targets(batch.reward, batch.not_done, next, cfg_.discount);
    const auto loss = ctde_critic_loss(nets_.critics, batch.obs, batch.actions, y, alpha);
    check_finite(loss.loss, "critic loss");
    for (std::size_t i = 0; i < nets_.critics.size(); ++i) apply_critic(i, loss.grads[i]);
    stats.critic_loss = loss.loss;
    stats.cql_penalty = loss.penalty_mean;
    for (std::size_t i = 0; i < nets_.policies.size(); ++i) {
      stats.policy_loss += improve_policy(i, batch.obs[i]);
    }
    return stats;
  }

  TrainerConfig cfg_;
  AgentNets nets_;
  std::vector<nn::AdamState> critic_opt_;
  std::vector<nn::AdamState> policy_opt_;
  long long steps_ = 0;
};

struct TrainResult {
  AgentNets nets;
  std::vector<CurveRow> curve;
  long long gradient_steps = 0;
};

struct OnlineResult {
  AgentNets nets;
  ReplayBuffer buffer;
  std::vector<CurveRow> curve;
  long long gradient_steps = 0;
};

inline void check_records(std::span<const TransitionRecord> records, const NetConfig& net) {
  for (const auto& r : records) {
    if (static_cast<int>(r.obs.size()) != net.num_aps ||
        static_cast<int>(r.action.size()) != net.num_aps) {
      throw ConfigError("dataset agent count does not match num_aps");
    }
    for (std::size_t i = 0; i < r.obs.size(); ++i) {
      if (static_cast<int>(r.obs[i].size()) != net.obs_dim() ||
          static_cast<int>(r.next_obs[i].size()) != net.obs_dim()) {
        throw ConfigError("dataset observation length does not match 2 * top_n");
      }
      if (r.action[i] < 0 || r.action[i] > net.top_n) {
        throw ConfigError("dataset action outside [0, top_n]");
      }
    }
  }
}

// K iterations of G gradient steps on uniformly sampled batches.
inline TrainResult train_offline(const TrainerConfig& cfg, const NetConfig& net,
                                 std::span<const TransitionRecord> dataset,
                                 const Evaluator& evaluator = {}) {
  cfg.validate();
  if (!is_offline(cfg.algo)) throw UsageError("train_offline requires a cql-* algorithm");
  if (dataset.empty()) throw ConfigError("offline training needs a non-empty dataset");
  check_records(dataset, net);
  Rng init_rng = make_rng(cfg.seed, "init");
  Rng batch_rng = make_rng(cfg.seed, "batch");
  Learner learner(cfg, make_agent_nets(cfg, net, init_rng));
  TrainResult result;
  for (int k = 0; k < cfg.iterations; ++k) {
    CurveRow row;
    row.iteration = k + 1;
    for (int g = 0; g < cfg.grad_steps; ++g) {
      const auto idx = sample_without_replacement(dataset.size(), cfg.batch_size, batch_rng);
      const auto stats = learner.gradient_step(make_batch(dataset, idx, cfg.reward_scale));
      row.critic_loss += stats.critic_loss / cfg.grad_steps;
      row.policy_loss += stats.policy_loss / cfg.grad_steps;
      row.cql_penalty_mean += stats.cql_penalty / cfg.grad_steps;
    }
    if (evaluator && cfg.eval_every > 0 && (k + 1) % cfg.eval_every == 0) {
      row.eval = evaluator(learner.nets());
    }
    result.curve.push_back(row);
  }
  result.gradient_steps = learner.steps();
  result.nets = learner.release();
  return result;
}

// Episodes of interaction; after each episode, G gradient steps on the
// replay buffer. DQN explores epsilon-greedily, SAC samples its policy.
inline OnlineResult train_online(const TrainerConfig& cfg, const NetConfig& net,
                                 const Evaluator& evaluator = {}) {
  cfg.validate();
  net.validate();
  if (is_offline(cfg.algo)) throw UsageError("train_online requires sac-* or dqn-c");
  Rng init_rng = make_rng(cfg.seed, "init");
  Rng batch_rng = make_rng(cfg.seed, "batch");
  Rng act_rng = make_rng(cfg.seed, "act");
  Learner learner(cfg, make_agent_nets(cfg, net, init_rng));
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.replay_capacity));
  std::vector<CurveRow> curve;
  const bool dqn = cfg.algo == Algo::kDqnC;
  for (int e = 0; e < cfg.online_episodes; ++e) {
    EnvState state = reset(net, make_rng(cfg.seed, "train-env", static_cast<std::uint64_t>(e)));
    const double eps = cfg.epsilon(e, cfg.online_episodes);
    auto obs = observe(state);
    while (!state.done()) {
      JointAction action;
      if (dqn) {
        if (std::uniform_real_distribution<double>(0.0, 1.0)(act_rng) < eps) {
          action.resize(net.num_aps);
          for (int& a : action) a = std::uniform_int_distribution<int>(0, net.top_n)(act_rng);
        } else {
          action = act(learner.nets(), obs, ActMode::kGreedy, act_rng);
        }
      } else {
        action = act(learner.nets(), obs, ActMode::kSample, act_rng);
      }
      TransitionRecord rec;
      rec.episode_id = e;
      rec.t = state.t;
      rec.obs = obs;
      rec.action = action;
      const StepOutcome out = step(state, action);
      rec.reward = out.reward;
      rec.next_obs = out.observations;
      rec.done = out.done;
      rec.behavior_tag = to_string(cfg.algo);
      buffer.push(std::move(rec));
      obs = out.observations;
    }
    CurveRow row;
    row.iteration = e + 1;
    for (int g = 0; g < cfg.online_grad_steps; ++g) {
      const auto idx = sample_without_replacement(buffer.size(), cfg.batch_size, batch_rng);
      const auto stats = learner.gradient_step(make_batch(buffer.storage(), idx, cfg.reward_scale));
      row.critic_loss += stats.critic_loss / cfg.online_grad_steps;
      row.policy_loss += stats.policy_loss / cfg.online_grad_steps;
      row.cql_penalty_mean += stats.cql_penalty / cfg.online_grad_steps;
    }
    if (evaluator && cfg.eval_every > 0 && (e + 1) % cfg.eval_every == 0) {
      row.eval = evaluator(learner.nets());
    }
    curve.push_back(row);
  }
  const long long steps = learner.steps();
  return OnlineResult{learner.release(), std::move(buffer), std::move(curve), steps};
}

}  // namespace rrm::marl
