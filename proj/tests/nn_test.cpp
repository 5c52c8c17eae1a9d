#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "rrm/nn.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace rrm::nn {
namespace {

using fixture::random_matrix;
using fixture::random_net;

TEST(Forward, ZeroNetGivesZeroOutput) {
  const DenseNet net({4, 8, 3});
  const Vector y = forward(net, Vector::Constant(4, 2.5));
  EXPECT_TRUE(y.isZero(0.0));
}

TEST(Forward, IdentityLayerPassesInputThrough) {
  DenseNet net({3, 3});
  net.weight(0) = Matrix::Identity(3, 3);
  const Vector x = (Vector(3) << -1.5, 0.25, 7.0).finished();
  EXPECT_EQ(forward(net, x), x);
}

TEST(Forward, MatchesNaiveLoops) {
  Rng rng = make_rng(0, "fwd");
  for (int trial = 0; trial < 20; ++trial) {
    const DenseNet net = random_net({2, 3, 2}, rng);
    const Matrix x = random_matrix(2, 1, rng, 2.0);
    const Vector y = forward(net, x.col(0));
    const auto expect = oracle::naive_forward(net, {x(0, 0), x(1, 0)});
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(y(k), expect[k], 1e-12);
  }
}

TEST(Forward, BatchEqualsPerColumn) {
  Rng rng = make_rng(1, "fwd");
  const DenseNet net = random_net({5, 7, 4}, rng);
  const Matrix x = random_matrix(5, 9, rng);
  const Matrix y = predict(net, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    EXPECT_TRUE(y.col(c).isApprox(forward(net, x.col(c)), 1e-14));
  }
}

TEST(Forward, WrongInputWidthRaises) {
  const DenseNet net({4, 2});
  EXPECT_THROW(forward(net, Vector::Zero(3)), DimensionMismatch);
}

TEST(Backward, LinearLeastSquaresClosedForm) {
  Rng rng = make_rng(2, "ls");
  DenseNet net({4, 1});
  net.weight(0) = random_matrix(1, 4, rng);
  const Matrix x = random_matrix(4, 10, rng);
  const Matrix y = random_matrix(1, 10, rng);
  const auto cache = forward_batch(net, x);
  const Matrix residual = cache.output() - y;
  const auto back = backward(net, cache, 2.0 * residual);
  // d/dw sum (x^T w - y)^2 = 2 X (X^T w - y) with samples as columns of X
  const Matrix expect = 2.0 * x * residual.transpose();
  EXPECT_TRUE(back.grads.d_weights[0].transpose().isApprox(expect, 1e-12));
  EXPECT_NEAR(back.grads.d_biases[0](0), 2.0 * residual.sum(), 1e-12);
}

TEST(Backward, DeadReluGivesZeroHiddenGradients) {
  Rng rng = make_rng(3, "dead");
  DenseNet net = random_net({3, 5, 2}, rng);
  net.weight(0).setZero();
  net.bias(0).setConstant(-1.0);
  const auto cache = forward_batch(net, random_matrix(3, 4, rng));
  const auto back = backward(net, cache, Matrix::Ones(2, 4));
  EXPECT_TRUE(back.grads.d_weights[0].isZero(0.0));
  EXPECT_TRUE(back.grads.d_biases[0].isZero(0.0));
  EXPECT_TRUE(back.input_grad.isZero(0.0));
}

// Scalar loss sum(C .* net(X)) so that the output gradient is C.
double weighted_output(const DenseNet& net, const Matrix& x, const Matrix& c) {
  return (predict(net, x).array() * c.array()).sum();
}

TEST(Backward, FiniteDifferencesOnWideNet) {
  Rng rng = make_rng(4, "fd");
  DenseNet net = random_net({24, 32, 5}, rng);
  const Matrix x = random_matrix(24, 3, rng);
  const Matrix c = random_matrix(5, 3, rng);
  const auto back = backward(net, forward_batch(net, x), c);
  const auto fd = oracle::finite_difference(net, [&] { return weighted_output(net, x, c); });
  EXPECT_LE(oracle::max_relative_error(oracle::flatten(back.grads), fd), 1e-4);
}

TEST(Backward, FiniteDifferencesOnRandomSmallNets) {
  Rng rng = make_rng(5, "fd");
  for (int trial = 0; trial < 50; ++trial) {
    const int in = std::uniform_int_distribution<int>(1, 6)(rng);
    const int hidden = std::uniform_int_distribution<int>(1, 8)(rng);
    const int out = std::uniform_int_distribution<int>(1, 4)(rng);
    DenseNet net = random_net({in, hidden, hidden, out}, rng);
    const Matrix x = random_matrix(in, 4, rng);
    const Matrix c = random_matrix(out, 4, rng);
    const auto back = backward(net, forward_batch(net, x), c);
    const auto fd = oracle::finite_difference(net, [&] { return weighted_output(net, x, c); });
    ASSERT_LE(oracle::max_relative_error(oracle::flatten(back.grads), fd), 1e-4) << trial;
  }
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng = make_rng(6, "fd");
  const DenseNet net = random_net({4, 6, 3}, rng);
  Matrix x = random_matrix(4, 1, rng);
  const Matrix c = random_matrix(3, 1, rng);
  const auto back = backward(net, forward_batch(net, x), c);
  for (int k = 0; k < 4; ++k) {
    const double saved = x(k, 0);
    x(k, 0) = saved + 1e-6;
    const double up = weighted_output(net, x, c);
    x(k, 0) = saved - 1e-6;
    const double down = weighted_output(net, x, c);
    x(k, 0) = saved;
    EXPECT_NEAR(back.input_grad(k, 0), (up - down) / 2e-6, 1e-7);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng = make_rng(7, "adam");
  DenseNet net = random_net({3, 4, 2}, rng);
  const DenseNet before = net;
  AdamState state = AdamState::for_net(net, 1e-3);
  adam_step(net, Gradients::zeros_like(net), state);
  EXPECT_EQ(net, before);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Rng rng = make_rng(8, "adam");
  DenseNet net = random_net({3, 2}, rng);
  const DenseNet before = net;
  AdamState state = AdamState::for_net(net, 1e-3);
  Gradients g = Gradients::zeros_like(net);
  g.d_weights[0].setConstant(0.37);
  g.d_biases[0].setConstant(-2.0);
  adam_step(net, g, state);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  const Matrix dw = before.weight(0) - net.weight(0);
  const Vector db = before.bias(0) - net.bias(0);
  for (Eigen::Index k = 0; k < dw.size(); ++k) {
    EXPECT_NEAR(dw.data()[k], 1e-3 * 0.37 / (0.37 + 1e-8), 1e-15);
  }
  for (Eigen::Index k = 0; k < db.size(); ++k) EXPECT_NEAR(db(k), -1e-3 * 2.0 / (2.0 + 1e-8), 1e-15);
}

TEST(Adam, NonFiniteGradientAbortsWithoutChanges) {
  Rng rng = make_rng(9, "adam");
  DenseNet net = random_net({2, 2}, rng);
  const DenseNet before = net;
  AdamState state = AdamState::for_net(net, 1e-3);
  Gradients g = Gradients::zeros_like(net);
  g.d_weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(net, g, state), NumericalError);
  EXPECT_EQ(net, before);
  EXPECT_EQ(state.step, 0);
}

TEST(Polyak, UnitTauCopiesZeroTauKeeps) {
  Rng rng = make_rng(10, "polyak");
  const DenseNet source = random_net({3, 4, 2}, rng);
  DenseNet target = random_net({3, 4, 2}, rng);
  const DenseNet original = target;
  polyak_update(target, source, 0.0);
  EXPECT_EQ(target, original);
  polyak_update(target, source, 1.0);
  EXPECT_EQ(target, source);
}

TEST(Polyak, BlendsLinearly) {
  DenseNet a({1, 1}), b({1, 1});
  a.weight(0)(0, 0) = 1.0;
  b.weight(0)(0, 0) = 3.0;
  polyak_update(a, b, 0.25);
  EXPECT_DOUBLE_EQ(a.weight(0)(0, 0), 1.5);
}

TEST(LogSumExp, ConstantVector) {
  EXPECT_NEAR(logsumexp(std::vector<double>(7, 2.0)), 2.0 + std::log(7.0), 1e-14);
}

TEST(LogSumExp, LargeValuesDoNotOverflow) {
  EXPECT_NEAR(logsumexp(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::numbers::ln2, 1e-12);
}

TEST(LogSumExp, BoundedByMaxAndMaxPlusLogLength) {
  Rng rng = make_rng(11, "lse");
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const Matrix v = random_matrix(n, 1, rng, 50.0);
    const double lse = logsumexp(v.col(0));
    EXPECT_GE(lse, v.maxCoeff());
    EXPECT_LE(lse, v.maxCoeff() + std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST(Softmax, ExactSmallCase) {
  const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, PositiveAndNormalized) {
  Rng rng = make_rng(12, "softmax");
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 16)(rng);
    const Matrix v = random_matrix(n, 1, rng, 30.0);
    const Vector p = softmax(v.col(0));
    EXPECT_GT(p.minCoeff(), 0.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

TEST(Serialization, TextRoundTripIsBitExact) {
  Rng rng = make_rng(13, "json");
  const DenseNet net = random_net({6, 16, 16, 4}, rng);
  const std::string text = to_json(net).dump();
  const DenseNet back = from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, net);
  EXPECT_EQ(to_json(back).dump(), text);
}

TEST(Serialization, RejectsParameterCountMismatch) {
  auto j = to_json(DenseNet({2, 2}));
  j["params"].push_back(1.0);
  EXPECT_THROW(from_json(j), IoError);
}

TEST(Init, GlorotWithinLimitsWithZeroBiases) {
  Rng rng = make_rng(14, "init");
  const DenseNet net = DenseNet::glorot({6, 256, 4}, rng);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 262.0));
  EXPECT_LE(net.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 260.0));
  EXPECT_TRUE(net.bias(0).isZero(0.0));
  EXPECT_TRUE(net.all_finite());
}

}  // namespace
}  // namespace rrm::nn
