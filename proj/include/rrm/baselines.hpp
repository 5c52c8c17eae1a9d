#pragma once

// Benchmark schedulers: random walk, greedy SINR, round-robin TDM and
// ITLinQ-style interference-tolerance scheduling.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rrm/env.hpp"
#include "rrm/policy.hpp"

namespace rrm {

enum class BaselineKind { kRandomWalk, kGreedy, kTdm, kItlinq };

struct ItlinqParams {
  double m_db = 25.0;    // tolerance constant M, dB
  double eta_itl = 0.5;  // SNR exponent in [0, 1]

  void validate() const {
    if (!(eta_itl >= 0.0 && eta_itl <= 1.0)) {
      throw ConfigError("itlinq eta_itl must be in [0, 1]");
    }
  }
};

// Uniform over each AP's occupied ranking slots; silent only when empty.
inline JointAction rw_action(const EnvState& state, Rng& rng) {
  JointAction action(state.num_aps(), state.cfg.silent_action());
  for (int i = 0; i < state.num_aps(); ++i) {
    const int n = static_cast<int>(state.topn_ranking[i].size());
    if (n > 0) action[i] = std::uniform_int_distribution<int>(0, n - 1)(rng);
  }
  return action;
}

// Index of the largest entry; ties resolve to the lowest index.
inline int argmax_first(const std::vector<double>& v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(v.size()); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

// Serves the ranked UE with the highest observed SINR.
inline JointAction greedy_action(const EnvState& state) {
  const auto obs = observe(state);
  JointAction action(state.num_aps(), state.cfg.silent_action());
  for (int i = 0; i < state.num_aps(); ++i) {
    const int n = static_cast<int>(state.topn_ranking[i].size());
    if (n == 0) continue;
    std::vector<double> sinr_hat(n);
    for (int k = 0; k < n; ++k) sinr_hat[k] = obs[i][2 * k];
    action[i] = argmax_first(sinr_hat);
  }
  return action;
}

// Round-robin over all UEs of each AP (not only the ranked ones).
class TdmScheduler {
 public:
  void reset(const EnvState& state) {
    members_.assign(state.num_aps(), {});
    cursor_.assign(state.num_aps(), 0);
    for (int i = 0; i < state.num_aps(); ++i) members_[i] = state.topology.ues_of(i);
  }

  Schedule next() {
    Schedule schedule(members_.size(), -1);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i].empty()) continue;
      schedule[i] = members_[i][cursor_[i]];
      cursor_[i] = (cursor_[i] + 1) % static_cast<int>(members_[i].size());
    }
    return schedule;
  }

  const std::vector<int>& cursors() const { return cursor_; }

 private:
  std::vector<std::vector<int>> members_;
  std::vector<int> cursor_;
};

// Slot form of the round-robin decision. A UE outside its AP's top-N
// ranking has no slot and maps to the silent index.
inline JointAction tdm_action(const EnvState& state, TdmScheduler& tdm) {
  return actions_from_schedule(state, tdm.next());
}

// Sequential interference-tolerance check in AP index order. Each AP walks
// its ranking (PF-descending) and serves the first UE whose interference
// from the APs already switched on stays within M * SNR^eta * noise.
inline JointAction itlinq_action(const EnvState& state, const ItlinqParams& params) {
  const double p = dbm_to_mw(state.cfg.tx_power_dbm);
  const double noise = dbm_to_mw(state.cfg.noise_power_dbm);
  const double m = std::pow(10.0, params.m_db / 10.0);
  JointAction action(state.num_aps(), state.cfg.silent_action());
  std::vector<int> active;
  for (int i = 0; i < state.num_aps(); ++i) {
    const auto& ranking = state.topn_ranking[i];
    for (int k = 0; k < static_cast<int>(ranking.size()); ++k) {
      const int j = ranking[k];
      double interference = 0.0;
      for (int other : active) interference += state.gains(other, j) * p;
      const double snr = state.gains(i, j) * p / noise;
      if (interference <= m * std::pow(snr, params.eta_itl) * noise) {
        action[i] = k;
        active.push_back(i);
        break;
      }
    }
  }
  return action;
}

class BaselinePolicy : public Policy {
 public:
  explicit BaselinePolicy(BaselineKind kind, ItlinqParams itlinq = {})
      : kind_(kind), itlinq_(itlinq) {
    itlinq_.validate();
  }

  std::string name() const override {
    switch (kind_) {
      case BaselineKind::kRandomWalk: return "rw";
      case BaselineKind::kGreedy: return "greedy";
      case BaselineKind::kTdm: return "tdm";
      case BaselineKind::kItlinq: return "itlinq";
    }
    return "unknown";
  }

  BaselineKind kind() const { return kind_; }
  const ItlinqParams& itlinq() const { return itlinq_; }

  void begin_episode(const EnvState& state) override { tdm_.reset(state); }

  Decision decide(const EnvState& state, Rng& rng) override {
    switch (kind_) {
      case BaselineKind::kRandomWalk: return decision_from_actions(state, rw_action(state, rng));
      case BaselineKind::kGreedy: return decision_from_actions(state, greedy_action(state));
      case BaselineKind::kItlinq:
        return decision_from_actions(state, itlinq_action(state, itlinq_));
      case BaselineKind::kTdm: {
        Schedule schedule = tdm_.next();
        JointAction action = actions_from_schedule(state, schedule);
        return {std::move(action), std::move(schedule)};
      }
    }
    throw std::logic_error("unhandled baseline kind");
  }

  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<BaselinePolicy>(kind_, itlinq_);
  }

 private:
  BaselineKind kind_;
  ItlinqParams itlinq_;
  TdmScheduler tdm_;
};

inline BaselineKind parse_baseline(const std::string& name) {
  if (name == "rw") return BaselineKind::kRandomWalk;
  if (name == "greedy") return BaselineKind::kGreedy;
  if (name == "tdm") return BaselineKind::kTdm;
  if (name == "itlinq") return BaselineKind::kItlinq;
  throw UsageError("unknown baseline policy: " + name);
}

}  // namespace rrm
