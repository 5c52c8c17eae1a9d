#pragma once

#include <random>
#include <vector>

#include "rrm/nn.hpp"
#include "rrm/random.hpp"

namespace rrm::fixture {

inline nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                                double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  nn::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

// Glorot weights with small random biases, so no unit sits exactly at a
// ReLU kink.
inline nn::DenseNet random_net(std::vector<int> dims, Rng& rng) {
  nn::DenseNet net = nn::DenseNet::glorot(std::move(dims), rng);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index k = 0; k < net.bias(l).size(); ++k) net.bias(l)(k) = u(rng);
  }
  return net;
}

inline std::vector<int> random_actions(int count, int num_actions, Rng& rng) {
  std::vector<int> a(count);
  for (int& x : a) x = std::uniform_int_distribution<int>(0, num_actions - 1)(rng);
  return a;
}

}  // namespace rrm::fixture
