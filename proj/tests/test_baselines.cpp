#include <gtest/gtest.h>

#include <cmath>

#include "crossq/baselines.hpp"
#include "oracles.hpp"

using namespace crossq;

namespace {

FeatureRows grid_rows(std::size_t n, std::size_t d) {
  FeatureRows x(n, std::vector<double>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) x[r][i] = std::sin(1.3 * static_cast<double>(r) + 0.7 * static_cast<double>(i));
  return x;
}

}  // namespace

TEST(ClassicalKernels, RbfExamples) {
  const FeatureRows x{{0.0, 0.0}, {std::sqrt(std::log(2.0)), 0.0}, {1.0, 2.0}};
  const auto k = rbf_kernel(x, nullptr, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(k(i, i), 1.0);
  EXPECT_NEAR(k(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(k(0, 2), std::exp(-5.0), 1e-15);
  EXPECT_TRUE(k.symmetric);
  EXPECT_THROW(rbf_kernel(x, nullptr, 0.0), ContractError);
}

TEST(ClassicalKernels, LinearOfOrthonormalRowsIsIdentity) {
  const double s = 1 / std::sqrt(2.0);
  const FeatureRows x{{s, s, 0}, {s, -s, 0}, {0, 0, 1}};
  const auto k = linear_kernel(x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(k(i, j), i == j ? 1.0 : 0.0, 1e-15);
}

TEST(ClassicalKernels, CrossShapeAndErrors) {
  const FeatureRows a{{1, 2}, {3, 4}, {5, 6}};
  const FeatureRows b{{1, 0}};
  const auto k = linear_kernel(a, &b);
  EXPECT_EQ(k.rows(), 1u);
  EXPECT_EQ(k.cols(), 3u);
  EXPECT_DOUBLE_EQ(k(0, 2), 5.0);
  const FeatureRows bad{{1, 2, 3}};
  EXPECT_THROW(linear_kernel(a, &bad), ContractError);
}

TEST(ClassicalKernels, DefaultGamma) {
  const FeatureRows x{{0.0, 2.0}, {2.0, 0.0}};
  EXPECT_DOUBLE_EQ(default_gamma(x), 1.0 / (2 * 1.0));  // var of {0,2,2,0} is 1
  EXPECT_DOUBLE_EQ(default_gamma(FeatureRows{{3.0}, {3.0}}), 1.0);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto x = grid_rows(9, 4);
  const std::vector<int> y{1, 0, 0, 1, 1, 0, 1, 0, 1};
  for (std::size_t hidden : {0u, 3u, 7u}) {
    const auto m = mlp_init(4, hidden, 11 + hidden);
    EXPECT_NEAR(mlp_loss_gradient(m, x, y).loss, oracle::mlp_loss(m, x, y), 1e-12);
    EXPECT_LT(oracle::mlp_gradient_error(m, x, y), 1e-5) << "hidden=" << hidden;
  }
}

TEST(Mlp, SeparableProblemIsLearned) {
  FeatureRows x;
  std::vector<int> y;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    x.push_back({0.1 * i});
    y.push_back(i > 0 ? 1 : 0);
  }
  const auto m = mlp_train(x, y, {0, 500, 0.5, 4, 3});
  const auto pred = mlp_predict(m, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(pred.label[i], y[i] ? 1 : -1) << i;
  ASSERT_EQ(m.loss_trace.size(), 500u);
  EXPECT_LT(m.loss_trace.back(), m.loss_trace.front());
}

TEST(Mlp, ConstantLabelsConvergeToPrior) {
  const auto x = grid_rows(40, 3);
  const std::vector<int> ones(40, 1);
  const auto m = mlp_train(x, ones, {5, 300, 0.5, 8, 4});
  for (double p : mlp_predict(m, x).probability) EXPECT_GT(p, 0.95);
  const std::vector<int> zeros(40, 0);
  const auto m0 = mlp_train(x, zeros, {0, 300, 0.5, 8, 4});
  for (double p : mlp_predict(m0, x).probability) EXPECT_LT(p, 0.05);
}

TEST(Mlp, DeterministicForSeed) {
  const auto x = grid_rows(50, 5);
  std::vector<int> y;
  for (std::size_t i = 0; i < 50; ++i) y.push_back(x[i][0] + x[i][2] > 0 ? 1 : 0);
  const MlpConfig cfg{6, 20, 0.1, 7, 99};
  const auto a = mlp_train(x, y, cfg);
  const auto b = mlp_train(x, y, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  auto other = cfg;
  other.seed = 100;
  EXPECT_NE(mlp_train(x, y, other).parameters(), a.parameters());
}

TEST(Mlp, RejectsBadInput) {
  const auto x = grid_rows(4, 2);
  EXPECT_THROW(mlp_train(x, std::vector<int>{1, 0, 2, 1}, {}), ContractError);
  EXPECT_THROW(mlp_train(x, std::vector<int>{1, 0}, {}), ContractError);
  MlpConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(mlp_train(x, std::vector<int>{1, 0, 1, 0}, bad), ContractError);
  const auto m = mlp_init(2, 3, 1);
  EXPECT_THROW(mlp_predict(m, FeatureRows{{1.0}}), ContractError);
}
