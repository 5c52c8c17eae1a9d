#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "rrm/marl/codec.hpp"
#include "rrm/nn.hpp"
#include "rrm/random.hpp"
#include "rrm/transition.hpp"

namespace rrm::marl {

// Training batch in column-major form (one sample per column).
struct Batch {
  std::vector<nn::Matrix> obs;       // per agent, obs_dim x B
  std::vector<nn::Matrix> next_obs;  // per agent, obs_dim x B
  std::vector<std::vector<int>> actions;  // per agent, B entries
  nn::Vector reward;                 // scaled
  nn::Vector not_done;               // 1 - done

  int size() const { return static_cast<int>(reward.size()); }
  int num_agents() const { return static_cast<int>(obs.size()); }

  static nn::Matrix stack(const std::vector<nn::Matrix>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.rows();
    nn::Matrix out(rows, parts.front().cols());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      out.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    return out;
  }

  // Global state: agent observations stacked in agent order.
  nn::Matrix state() const { return stack(obs); }
  nn::Matrix next_state() const { return stack(next_obs); }

  std::vector<int> joint_actions(const JointActionCodec& codec) const {
    std::vector<int> out(size());
    std::vector<int> a(num_agents());
    for (int b = 0; b < size(); ++b) {
      for (int i = 0; i < num_agents(); ++i) a[i] = actions[i][b];
      out[b] = codec.encode(a);
    }
    return out;
  }
};

inline Batch make_batch(std::span<const TransitionRecord> records, std::span<const std::size_t> idx,
                        double reward_scale) {
  if (idx.empty()) throw std::invalid_argument("make_batch: empty index set");
  const auto& first = records[idx[0]];
  const int agents = static_cast<int>(first.obs.size());
  const int dim = static_cast<int>(first.obs.front().size());
  const auto cols = static_cast<Eigen::Index>(idx.size());
  Batch batch;
  batch.obs.assign(agents, nn::Matrix(dim, cols));
  batch.next_obs.assign(agents, nn::Matrix(dim, cols));
  batch.actions.assign(agents, std::vector<int>(idx.size()));
  batch.reward.resize(cols);
  batch.not_done.resize(cols);
  for (Eigen::Index b = 0; b < cols; ++b) {
    const auto& rec = records[idx[b]];
    if (static_cast<int>(rec.obs.size()) != agents || static_cast<int>(rec.action.size()) != agents) {
      throw DimensionMismatch("record agent count differs within batch");
    }
    for (int i = 0; i < agents; ++i) {
      if (static_cast<int>(rec.obs[i].size()) != dim || static_cast<int>(rec.next_obs[i].size()) != dim) {
        throw DimensionMismatch("record observation length differs within batch");
      }
      batch.obs[i].col(b) = Eigen::Map<const nn::Vector>(rec.obs[i].data(), dim);
      batch.next_obs[i].col(b) = Eigen::Map<const nn::Vector>(rec.next_obs[i].data(), dim);
      batch.actions[i][b] = rec.action[i];
    }
    batch.reward(b) = rec.reward * reward_scale;
    batch.not_done(b) = rec.done ? 0.0 : 1.0;
  }
  return batch;
}

// `count` distinct indices from [0, n), uniform (Floyd's algorithm).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                           Rng& rng) {
  count = std::min(count, n);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(out.begin(), out.end(), t) == out.end()) {
      out.push_back(t);
    } else {
      out.push_back(j);
    }
  }
  return out;
}

// Fixed-capacity ring of transitions; the oldest record is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be >= 1");
  }

  void push(TransitionRecord rec) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(rec));
    } else {
      ring_[cursor_] = std::move(rec);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return ring_.empty(); }

  std::span<const TransitionRecord> storage() const { return ring_; }

  // Records oldest first.
  std::vector<TransitionRecord> records() const {
    if (ring_.size() < capacity_) return ring_;
    std::vector<TransitionRecord> out;
    out.reserve(ring_.size());
    for (std::size_t k = 0; k < ring_.size(); ++k) out.push_back(ring_[(cursor_ + k) % capacity_]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<TransitionRecord> ring_;
};

}  // namespace rrm::marl
