#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rrm/marl/agent_nets.hpp"
#include "rrm/policy.hpp"

namespace rrm::marl {

enum class ActMode { kSample, kGreedy };

inline int argmax_lowest(const nn::Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return static_cast<int>(best);
}

inline int sample_categorical(const nn::Vector& logits, Rng& rng) {
  const nn::Vector p = nn::softmax(logits);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    acc += p(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);
}

// Joint action from per-agent observations.
// Greedy: CTDE takes each agent's argmax of its own critic; DQN takes the
// joint-critic argmax decoded per agent; SAC-family scopes take the policy
// argmax. Sample mode draws from the policy softmax (DQN has no policy and
// stays greedy). Ties go to the lowest action index.
inline JointAction act(const AgentNets& nets, const std::vector<std::vector<double>>& obs,
                       ActMode mode, Rng& rng) {
  if (static_cast<int>(obs.size()) != nets.num_agents) {
    throw DimensionMismatch("act: expected observations for " + std::to_string(nets.num_agents) +
                            " agents");
  }
  const auto to_vec = [](const std::vector<double>& v) {
    return nn::Vector(Eigen::Map<const nn::Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  JointAction action(nets.num_agents);
  if (nets.scope() == Scope::kCentralized) {
    nn::Vector state(static_cast<Eigen::Index>(obs.size() * obs.front().size()));
    Eigen::Index r = 0;
    for (const auto& o : obs) {
      state.segment(r, static_cast<Eigen::Index>(o.size())) = to_vec(o);
      r += static_cast<Eigen::Index>(o.size());
    }
    int joint = 0;
    if (nets.policies.empty()) {
      joint = argmax_lowest(nn::forward(nets.critics[0], state));
    } else {
      const nn::Vector logits = nn::forward(nets.policies[0], state);
      joint = mode == ActMode::kSample ? sample_categorical(logits, rng) : argmax_lowest(logits);
    }
    return nets.codec().decode(joint);
  }
  for (int i = 0; i < nets.num_agents; ++i) {
    const nn::Vector o = to_vec(obs[i]);
    if (mode == ActMode::kSample && !nets.policies.empty()) {
      action[i] = sample_categorical(nn::forward(nets.policies[i], o), rng);
    } else if (nets.scope() == Scope::kCtde || nets.policies.empty()) {
      action[i] = argmax_lowest(nn::forward(nets.critics[i], o));
    } else {
      action[i] = argmax_lowest(nn::forward(nets.policies[i], o));
    }
  }
  return action;
}

// Scheduler driven by trained networks; acts on observations only.
class ModelPolicy : public Policy {
 public:
  ModelPolicy(std::shared_ptr<const AgentNets> nets, ActMode mode, std::string label = "model")
      : nets_(std::move(nets)), mode_(mode), label_(std::move(label)) {}

  std::string name() const override { return label_; }

  Decision decide(const EnvState& state, Rng& rng) override {
    return decision_from_actions(state, act(*nets_, observe(state), mode_, rng));
  }

  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<ModelPolicy>(nets_, mode_, label_);
  }

  const AgentNets& nets() const { return *nets_; }

 private:
  std::shared_ptr<const AgentNets> nets_;
  ActMode mode_;
  std::string label_;
};

}  // namespace rrm::marl
