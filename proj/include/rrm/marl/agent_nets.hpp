#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/env.hpp"
#include "rrm/marl/codec.hpp"
#include "rrm/marl/config.hpp"
#include "rrm/nn.hpp"

namespace rrm::marl {

// Critics, target critics and policies for one algorithm.
// Centralized: one critic and one policy over the global state with one
// output per joint action. Independent/CTDE: one of each per agent over the
// local observation with N + 1 outputs.
struct AgentNets {
  Algo algo = Algo::kCqlCtde;
  int num_agents = 0;
  int top_n = 0;
  std::string net_config_hash;
  std::vector<nn::DenseNet> critics;
  std::vector<nn::DenseNet> target_critics;
  std::vector<nn::DenseNet> policies;

  Scope scope() const { return scope_of(algo); }
  JointActionCodec codec() const { return {num_agents, top_n + 1}; }

  friend bool operator==(const AgentNets&, const AgentNets&) = default;
};

inline std::vector<int> layer_dims(int in, int out, const TrainerConfig& cfg) {
  std::vector<int> dims{in};
  for (int l = 0; l < cfg.hidden_layers; ++l) dims.push_back(cfg.hidden_units);
  dims.push_back(out);
  return dims;
}

inline AgentNets make_agent_nets(const TrainerConfig& cfg, const NetConfig& net, Rng& rng) {
  AgentNets nets;
  nets.algo = cfg.algo;
  nets.num_agents = net.num_aps;
  nets.top_n = net.top_n;
  nets.net_config_hash = net.hash();
  const bool central = scope_of(cfg.algo) == Scope::kCentralized;
  const int in = central ? net.state_dim() : net.obs_dim();
  const int out = central ? nets.codec().size() : net.actions_per_agent();
  const int count = central ? 1 : net.num_aps;
  const auto dims = layer_dims(in, out, cfg);
  for (int k = 0; k < count; ++k) {
    nets.critics.push_back(nn::DenseNet::glorot(dims, rng));
    nets.target_critics.push_back(nets.critics.back());
    if (has_policy(cfg.algo)) nets.policies.push_back(nn::DenseNet::glorot(dims, rng));
  }
  return nets;
}

inline nlohmann::json to_json(const AgentNets& nets) {
  auto list = [](const std::vector<nn::DenseNet>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : v) arr.push_back(nn::to_json(n));
    return arr;
  };
  return {{"format", "rrm-model"},
          {"format_version", 1},
          {"algo", to_string(nets.algo)},
          {"scope", to_string(nets.scope())},
          {"num_agents", nets.num_agents},
          {"top_n", nets.top_n},
          {"net_config_hash", nets.net_config_hash},
          {"critics", list(nets.critics)},
          {"target_critics", list(nets.target_critics)},
          {"policies", list(nets.policies)}};
}

inline AgentNets agent_nets_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rrm-model") throw IoError("not a model file");
  if (j.value("format_version", 0) != 1) throw IoError("unsupported model format_version");
  AgentNets nets;
  nets.algo = parse_algo(j.at("algo").get<std::string>());
  nets.num_agents = j.at("num_agents").get<int>();
  nets.top_n = j.at("top_n").get<int>();
  nets.net_config_hash = j.at("net_config_hash").get<std::string>();
  for (const auto& n : j.at("critics")) nets.critics.push_back(nn::from_json(n));
  for (const auto& n : j.at("target_critics")) nets.target_critics.push_back(nn::from_json(n));
  for (const auto& n : j.at("policies")) nets.policies.push_back(nn::from_json(n));
  return nets;
}

}  // namespace rrm::marl
