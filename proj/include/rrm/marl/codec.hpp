#pragma once

#include <span>
#include <string>
#include <vector>

#include "rrm/error.hpp"

namespace rrm::marl {

// Mixed-radix bijection between per-agent actions and a joint index.
// Agent 0 is the least-significant digit.
class JointActionCodec {
 public:
  JointActionCodec(int num_agents, int actions_per_agent)
      : agents_(num_agents), base_(actions_per_agent) {
    if (num_agents < 1 || actions_per_agent < 1) {
      throw DimensionMismatch("codec needs >= 1 agent and >= 1 action");
    }
    size_ = 1;
    for (int i = 0; i < agents_; ++i) size_ *= base_;
  }

  int num_agents() const { return agents_; }
  int actions_per_agent() const { return base_; }
  int size() const { return size_; }

  int encode(std::span<const int> actions) const {
    if (static_cast<int>(actions.size()) != agents_) {
      throw DimensionMismatch("codec: expected " + std::to_string(agents_) + " actions");
    }
    int index = 0;
    for (int i = agents_ - 1; i >= 0; --i) {
      if (actions[i] < 0 || actions[i] >= base_) throw InvalidAction("codec: action out of range");
      index = index * base_ + actions[i];
    }
    return index;
  }

  std::vector<int> decode(int index) const {
    if (index < 0 || index >= size_) throw InvalidAction("codec: joint index out of range");
    std::vector<int> actions(agents_);
    for (int i = 0; i < agents_; ++i) {
      actions[i] = index % base_;
      index /= base_;
    }
    return actions;
  }

 private:
  int agents_;
  int base_;
  int size_;
};

}  // namespace rrm::marl
