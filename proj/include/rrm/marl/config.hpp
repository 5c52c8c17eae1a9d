#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "rrm/error.hpp"
#include "rrm/kv_config.hpp"

namespace rrm::marl {

enum class Algo { kSacC, kDqnC, kSacI, kSacCtde, kCqlC, kCqlI, kCqlCtde };

enum class Scope { kCentralized, kIndependent, kCtde };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::kSacC: return "sac-c";
    case Algo::kDqnC: return "dqn-c";
    case Algo::kSacI: return "sac-i";
    case Algo::kSacCtde: return "sac-ctde";
    case Algo::kCqlC: return "cql-c";
    case Algo::kCqlI: return "cql-i";
    case Algo::kCqlCtde: return "cql-ctde";
  }
  return "?";
}

inline std::string to_string(Scope s) {
  switch (s) {
    case Scope::kCentralized: return "centralized";
    case Scope::kIndependent: return "independent";
    case Scope::kCtde: return "ctde";
  }
  return "?";
}

inline Algo parse_algo(const std::string& name) {
  for (Algo a : {Algo::kSacC, Algo::kDqnC, Algo::kSacI, Algo::kSacCtde, Algo::kCqlC, Algo::kCqlI,
                 Algo::kCqlCtde}) {
    if (to_string(a) == name) return a;
  }
  throw UsageError("unknown algorithm: " + name);
}

inline Scope scope_of(Algo a) {
  switch (a) {
    case Algo::kSacC:
    case Algo::kDqnC:
    case Algo::kCqlC: return Scope::kCentralized;
    case Algo::kSacI:
    case Algo::kCqlI: return Scope::kIndependent;
    case Algo::kSacCtde:
    case Algo::kCqlCtde: return Scope::kCtde;
  }
  return Scope::kCentralized;
}

inline bool is_offline(Algo a) {
  return a == Algo::kCqlC || a == Algo::kCqlI || a == Algo::kCqlCtde;
}

inline bool has_policy(Algo a) { return a != Algo::kDqnC; }

struct TrainerConfig {
  Algo algo = Algo::kCqlCtde;
  double discount = 0.99;            // beta
  double cql_alpha = 1.0;
  double entropy_coeff = 1.0;        // policy improvement
  double target_entropy_coeff = 1.0; // soft term inside the TD target
  int iterations = 200;              // K
  int grad_steps = 100;              // G per iteration (offline)
  int online_episodes = 100;
  int online_grad_steps = 200;       // per episode
  int batch_size = 64;
  double actor_lr = 1e-5;
  double critic_lr = 1e-4;
  double polyak_tau = 0.005;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;
  int eval_every = 0;                // iterations (offline) / episodes (online); 0 = off
  int eval_episodes = 20;
  int hidden_layers = 2;
  int hidden_units = 256;
  double reward_scale = 0.01;
  int replay_capacity = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw ConfigError(std::string("invalid TrainerConfig: ") + msg);
    };
    require(discount > 0.0 && discount < 1.0, "discount must be in (0, 1)");
    require(cql_alpha >= 0.0, "cql_alpha must be >= 0");
    require(entropy_coeff >= 0.0 && target_entropy_coeff >= 0.0, "entropy coefficients must be >= 0");
    require(iterations >= 0 && grad_steps >= 0, "iterations and grad_steps must be >= 0");
    require(online_episodes >= 0 && online_grad_steps >= 0, "online counts must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be > 0");
    require(polyak_tau >= 0.0 && polyak_tau <= 1.0, "polyak_tau must be in [0, 1]");
    require(eps_end >= 0.0 && eps_start <= 1.0 && eps_end <= eps_start, "bad epsilon schedule");
    require(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0, "eps_decay_fraction in (0, 1]");
    require(eval_every >= 0 && eval_episodes >= 1, "bad evaluation cadence");
    require(hidden_layers >= 0 && hidden_units >= 1, "bad hidden layer shape");
    require(reward_scale > 0.0, "reward_scale must be > 0");
    require(replay_capacity >= 1, "replay_capacity must be >= 1");
  }

  KeyValues to_key_values() const {
    return {
        {"algo", to_string(algo)},
        {"discount", format_double(discount)},
        {"cql_alpha", format_double(cql_alpha)},
        {"entropy_coeff", format_double(entropy_coeff)},
        {"target_entropy_coeff", format_double(target_entropy_coeff)},
        {"iterations", std::to_string(iterations)},
        {"grad_steps", std::to_string(grad_steps)},
        {"online_episodes", std::to_string(online_episodes)},
        {"online_grad_steps", std::to_string(online_grad_steps)},
        {"batch_size", std::to_string(batch_size)},
        {"actor_lr", format_double(actor_lr)},
        {"critic_lr", format_double(critic_lr)},
        {"polyak_tau", format_double(polyak_tau)},
        {"eps_start", format_double(eps_start)},
        {"eps_end", format_double(eps_end)},
        {"eps_decay_fraction", format_double(eps_decay_fraction)},
        {"eval_every", std::to_string(eval_every)},
        {"eval_episodes", std::to_string(eval_episodes)},
        {"hidden_layers", std::to_string(hidden_layers)},
        {"hidden_units", std::to_string(hidden_units)},
        {"reward_scale", format_double(reward_scale)},
        {"replay_capacity", std::to_string(replay_capacity)},
        {"seed", std::to_string(seed)},
    };
  }

  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) {
      if (k == "algo") algo = parse_algo(v);
      else if (k == "discount") discount = parse_double(k, v);
      else if (k == "cql_alpha") cql_alpha = parse_double(k, v);
      else if (k == "entropy_coeff") entropy_coeff = parse_double(k, v);
      else if (k == "target_entropy_coeff") target_entropy_coeff = parse_double(k, v);
      else if (k == "iterations") iterations = static_cast<int>(parse_int(k, v));
      else if (k == "grad_steps") grad_steps = static_cast<int>(parse_int(k, v));
      else if (k == "online_episodes") online_episodes = static_cast<int>(parse_int(k, v));
      else if (k == "online_grad_steps") online_grad_steps = static_cast<int>(parse_int(k, v));
      else if (k == "batch_size") batch_size = static_cast<int>(parse_int(k, v));
      else if (k == "actor_lr") actor_lr = parse_double(k, v);
      else if (k == "critic_lr") critic_lr = parse_double(k, v);
      else if (k == "polyak_tau") polyak_tau = parse_double(k, v);
      else if (k == "eps_start") eps_start = parse_double(k, v);
      else if (k == "eps_end") eps_end = parse_double(k, v);
      else if (k == "eps_decay_fraction") eps_decay_fraction = parse_double(k, v);
      else if (k == "eval_every") eval_every = static_cast<int>(parse_int(k, v));
      else if (k == "eval_episodes") eval_episodes = static_cast<int>(parse_int(k, v));
      else if (k == "hidden_layers") hidden_layers = static_cast<int>(parse_int(k, v));
      else if (k == "hidden_units") hidden_units = static_cast<int>(parse_int(k, v));
      else if (k == "reward_scale") reward_scale = parse_double(k, v);
      else if (k == "replay_capacity") replay_capacity = static_cast<int>(parse_int(k, v));
      else if (k == "seed") seed = static_cast<std::uint64_t>(parse_int(k, v));
    }
  }

  static bool is_key(const std::string& k) {
    static const TrainerConfig probe;
    return probe.to_key_values().count(k) > 0;
  }

  // Linear decay from eps_start to eps_end over the first
  // eps_decay_fraction of the episodes, flat afterwards.
  double epsilon(int episode, int total_episodes) const {
    const double horizon = eps_decay_fraction * std::max(total_episodes, 1);
    const double frac = std::min(1.0, static_cast<double>(episode) / horizon);
    return (1.0 - frac) * eps_start + frac * eps_end;
  }
};

}  // namespace rrm::marl
