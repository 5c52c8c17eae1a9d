#pragma once

// Critic and policy losses for discrete soft actor-critic, DQN and the
// conservative (CQL) variants, in centralized, independent and
// value-decomposition (CTDE) form. Every loss returns its value and exact
// parameter gradients. TD targets are computed separately and treated as
// constants, so no gradient flows through the target networks.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "rrm/marl/agent_nets.hpp"
#include "rrm/nn.hpp"

namespace rrm::marl {

using nn::Matrix;
using nn::Vector;

inline constexpr double kPolicyFloor = 1e-8;

inline double floored_log(double p) { return std::log(std::max(p, kPolicyFloor)); }

// Per-column soft value: sum_a pi(a|s) * (Q(s,a) - c * log pi(a|s)).
inline Vector soft_value(const Matrix& q, const Matrix& policy_logits, double entropy_coeff) {
  if (q.rows() != policy_logits.rows() || q.cols() != policy_logits.cols()) {
    throw DimensionMismatch("soft_value: Q and policy shapes differ");
  }
  const Matrix pi = nn::softmax_columns(policy_logits);
  Vector v(q.cols());
  for (Eigen::Index b = 0; b < q.cols(); ++b) {
    double acc = 0.0;
    for (Eigen::Index a = 0; a < q.rows(); ++a) {
      acc += pi(a, b) * (q(a, b) - entropy_coeff * floored_log(pi(a, b)));
    }
    v(b) = acc;
  }
  return v;
}

// Per-column max over actions (DQN bootstrap).
inline Vector greedy_value(const Matrix& q) { return q.colwise().maxCoeff().transpose(); }

// r + discount * (1 - done) * next_value.
inline Vector td_targets(const Vector& reward, const Vector& not_done, const Vector& next_value,
                         double discount) {
  return reward + discount * not_done.cwiseProduct(next_value);
}

// CQL regularizer for one row: logsumexp(q_row) - q_row[a_data].
inline double cql_penalty(const Vector& q_row, int data_action) {
  if (q_row.size() == 0) throw std::invalid_argument("cql_penalty: empty row");
  return nn::logsumexp(q_row) - q_row(data_action);
}

struct CriticLoss {
  double loss = 0.0;           // value that was differentiated
  double eval_loss = 0.0;      // mean squared TD residual
  double penalty_mean = 0.0;   // mean CQL penalty (0 without CQL)
  std::vector<nn::Gradients> grads;  // one per critic
};

struct PolicyLoss {
  double loss = 0.0;
  std::vector<nn::Gradients> grads;  // one per policy
};

inline void check_actions(const Matrix& q, std::span<const int> actions) {
  if (static_cast<Eigen::Index>(actions.size()) != q.cols()) {
    throw DimensionMismatch("action count does not match batch size");
  }
  for (int a : actions) {
    if (a < 0 || a >= q.rows()) throw InvalidAction("dataset action outside critic output range");
  }
}

// Single-critic TD loss: mean (y - Q(s,a))^2, or with cql_alpha set,
// 1/2 * that + alpha * mean(logsumexp Q(s,.) - Q(s,a)). Used for the
// centralized critic, each independent critic, and DQN.
inline CriticLoss critic_td_loss(const nn::DenseNet& critic, const Matrix& inputs,
                                 std::span<const int> actions, const Vector& targets,
                                 std::optional<double> cql_alpha) {
  const auto cache = nn::forward_batch(critic, inputs);
  const Matrix& q = cache.output();
  check_actions(q, actions);
  const auto batch = static_cast<double>(q.cols());
  const double eval_weight = cql_alpha ? 0.5 : 1.0;
  const double alpha = cql_alpha.value_or(0.0);
  Matrix d_q = Matrix::Zero(q.rows(), q.cols());
  CriticLoss out;
  for (Eigen::Index b = 0; b < q.cols(); ++b) {
    const int a = actions[b];
    const double residual = targets(b) - q(a, b);
    out.eval_loss += residual * residual / batch;
    d_q(a, b) += eval_weight * (-2.0 * residual / batch);
    if (cql_alpha) {
      out.penalty_mean += cql_penalty(q.col(b), a) / batch;
      const Vector p = nn::softmax(q.col(b));
      d_q.col(b) += (alpha / batch) * p;
      d_q(a, b) -= alpha / batch;
    }
  }
  out.loss = eval_weight * out.eval_loss + alpha * out.penalty_mean;
  out.grads.push_back(nn::backward(critic, cache, d_q).grads);
  return out;
}

// Value-decomposition loss: mean (y - sum_i Q_i(o_i, a_i))^2 with one shared
// residual, plus alpha * mean(sum_i penalty_i) under CQL.
inline CriticLoss ctde_critic_loss(const std::vector<nn::DenseNet>& critics,
                                   const std::vector<Matrix>& obs,
                                   const std::vector<std::vector<int>>& actions,
                                   const Vector& targets, std::optional<double> cql_alpha) {
  const std::size_t agents = critics.size();
  if (obs.size() != agents || actions.size() != agents) {
    throw DimensionMismatch("ctde loss: per-agent inputs do not match critic count");
  }
  std::vector<nn::ForwardCache> caches;
  caches.reserve(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    caches.push_back(nn::forward_batch(critics[i], obs[i]));
    check_actions(caches[i].output(), actions[i]);
  }
  const Eigen::Index cols = caches.front().output().cols();
  const auto batch = static_cast<double>(cols);
  const double eval_weight = cql_alpha ? 0.5 : 1.0;
  const double alpha = cql_alpha.value_or(0.0);

  Vector q_tot = Vector::Zero(cols);
  for (std::size_t i = 0; i < agents; ++i) {
    for (Eigen::Index b = 0; b < cols; ++b) q_tot(b) += caches[i].output()(actions[i][b], b);
  }
  const Vector residual = targets - q_tot;

  CriticLoss out;
  out.eval_loss = residual.squaredNorm() / batch;
  for (std::size_t i = 0; i < agents; ++i) {
    const Matrix& q = caches[i].output();
    Matrix d_q = Matrix::Zero(q.rows(), cols);
    for (Eigen::Index b = 0; b < cols; ++b) {
      const int a = actions[i][b];
      d_q(a, b) += eval_weight * (-2.0 * residual(b) / batch);
      if (cql_alpha) {
        out.penalty_mean += cql_penalty(q.col(b), a) / batch;
        d_q.col(b) += (alpha / batch) * nn::softmax(q.col(b));
        d_q(a, b) -= alpha / batch;
      }
    }
    out.grads.push_back(nn::backward(critics[i], caches[i], d_q).grads);
  }
  out.loss = eval_weight * out.eval_loss + alpha * out.penalty_mean;
  return out;
}

// Sum of per-agent Q_i(o_i, a_i), evaluated sample by sample.
inline Vector q_total(const std::vector<nn::DenseNet>& critics, const std::vector<Matrix>& obs,
                      const std::vector<std::vector<int>>& actions) {
  Vector total = Vector::Zero(obs.front().cols());
  for (std::size_t i = 0; i < critics.size(); ++i) {
    const Matrix q = nn::predict(critics[i], obs[i]);
    for (Eigen::Index b = 0; b < q.cols(); ++b) total(b) += q(actions[i][b], b);
  }
  return total;
}

// Policy improvement: mean over the batch of
//   -sum_a pi(a|s) * (Q(s,a) - c * log pi(a|s)),
// with Q held fixed. The gradient w.r.t. logit z_b is
//   -(1/B) * pi_b * (g_b - sum_a pi_a g_a),  g_a = d/dpi_a [pi_a (Q_a - c log pi_a)].
inline PolicyLoss policy_improvement_loss(const nn::DenseNet& policy, const Matrix& inputs,
                                          const Matrix& q_values, double entropy_coeff) {
  const auto cache = nn::forward_batch(policy, inputs);
  const Matrix& logits = cache.output();
  if (logits.rows() != q_values.rows() || logits.cols() != q_values.cols()) {
    throw DimensionMismatch("policy loss: logits and Q shapes differ");
  }
  const auto batch = static_cast<double>(logits.cols());
  const Matrix pi = nn::softmax_columns(logits);
  Matrix d_logits(logits.rows(), logits.cols());
  PolicyLoss out;
  Vector g(logits.rows());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    double objective = 0.0;
    for (Eigen::Index a = 0; a < logits.rows(); ++a) {
      const double p = pi(a, b);
      objective += p * (q_values(a, b) - entropy_coeff * floored_log(p));
      // Below the floor log pi is a constant, so its derivative term vanishes.
      g(a) = q_values(a, b) - entropy_coeff * (p > kPolicyFloor ? std::log(p) + 1.0
                                                                  : std::log(kPolicyFloor));
    }
    out.loss -= objective / batch;
    const double mean_g = pi.col(b).dot(g);
    d_logits.col(b) = -(pi.col(b).array() * (g.array() - mean_g)).matrix() / batch;
  }
  out.grads.push_back(nn::backward(policy, cache, d_logits).grads);
  return out;
}

}  // namespace rrm::marl
