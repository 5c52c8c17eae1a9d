#pragma once

#include <memory>
#include <string>

#include "rrm/env.hpp"
#include "rrm/random.hpp"

namespace rrm {

// What a scheduler hands to the environment: the slot action recorded in
// datasets and the schedule actually executed. For every policy except
// round-robin the schedule is derived from the slot action.
struct Decision {
  JointAction action;
  Schedule schedule;
};

inline Decision decision_from_actions(const EnvState& state, JointAction action) {
  Schedule schedule = schedule_from_actions(state, action);
  return {std::move(action), std::move(schedule)};
}

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;

  // Called after every env reset, before the first decision.
  virtual void begin_episode(const EnvState&) {}

  virtual Decision decide(const EnvState& state, Rng& rng) = 0;

  // Independent copy with fresh per-episode state, for parallel workers.
  virtual std::unique_ptr<Policy> clone() const = 0;
};

}  // namespace rrm
