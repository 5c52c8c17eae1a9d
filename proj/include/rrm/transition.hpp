#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rrm {

// One (observations, joint action, reward, next observations) sample.
struct TransitionRecord {
  std::int64_t episode_id = 0;
  int t = 0;
  std::vector<std::vector<double>> obs;       // I x 2N, normalized
  std::vector<int> action;                    // I entries in [0, N]
  double reward = 0.0;                        // raw, unscaled
  std::vector<std::vector<double>> next_obs;  // I x 2N
  bool done = false;
  std::string behavior_tag;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

}  // namespace rrm
