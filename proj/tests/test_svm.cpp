#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "crossq/baselines.hpp"
#include "crossq/svm.hpp"
#include "oracles.hpp"

using namespace crossq;

namespace {

using oracle::Problem;
using oracle::random_problem;

void expect_kkt(const SvmModel& m, const KernelMatrix& k, const std::vector<int>& y, double tol) {
  double eq = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GE(m.alphas[i], 0.0);
    EXPECT_LE(m.alphas[i], m.C);
    eq += m.alphas[i] * y[i];
  }
  EXPECT_NEAR(eq, 0.0, 1e-8);
  const auto f = decision_values(m, k);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yf = y[i] * f[i];
    if (m.alphas[i] <= kSupportThreshold) {
      EXPECT_GE(yf, 1 - tol) << i;
    } else if (m.alphas[i] >= m.C - kSupportThreshold) {
      EXPECT_LE(yf, 1 + tol) << i;
    } else {
      EXPECT_NEAR(yf, 1.0, tol) << i;
    }
  }
}

}  // namespace

TEST(Smo, IdentityGramExample) {
  KernelMatrix k{RMatrix::identity(2), true};
  const std::vector<int> y{1, -1};
  const auto m = train_smo(k, y, {1.0, 1e-6});
  // Oracle: with alpha1 = alpha2 = a, W(a) = 2a - a^2 peaks at a = 1.
  double best_a = 0, best_w = -1;
  for (int s = 0; s <= 1000; ++s) {
    const double a = s / 1000.0;
    const double w = 2 * a - a * a;
    if (w > best_w) {
      best_w = w;
      best_a = a;
    }
  }
  EXPECT_NEAR(m.alphas[0], best_a, 1e-9);
  EXPECT_NEAR(m.alphas[1], best_a, 1e-9);
  EXPECT_NEAR(m.b, 0.0, 1e-12);
  const auto f = decision_values(m, k);
  EXPECT_NEAR(f[0], 1.0, 1e-12);
  EXPECT_NEAR(f[1], -1.0, 1e-12);
  const std::vector<double> row{1.0, 0.0};
  EXPECT_EQ(sign_label(decision(m, row)), 1);
}

TEST(Smo, TieBreakAndShapeErrors) {
  SvmModel m;
  m.alphas = {0, 0};
  m.train_labels = {1, -1};
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(sign_label(decision(m, zero)), -1);
  EXPECT_THROW(decision(m, std::vector<double>{1.0}), ContractError);
  KernelMatrix bad{RMatrix(2, 2), true};
  bad.values(0, 1) = bad.values(1, 0) = std::nan("");
  EXPECT_THROW(train_smo(bad, std::vector<int>{1, -1}), ContractError);
  EXPECT_THROW(train_smo(KernelMatrix{RMatrix::identity(2), true}, std::vector<int>{1, 0}), ContractError);
}

TEST(Smo, MatchesBruteForceDualOnSmallProblems) {
  int instances = 0;
  for (std::size_t n : {4u, 5u, 6u, 7u, 8u}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      for (double C : {0.5, 1.0, 10.0}) {
        const auto p = random_problem(n, 100 * n + seed);
        const auto held = random_problem(10, 999 + seed);
        const double gamma = 0.5;
        const auto k = rbf_kernel(p.x, nullptr, gamma);
        const auto kc = rbf_kernel(p.x, &held.x, gamma);
        const auto ref = oracle::brute_force_dual(k, p.y, C);
        ASSERT_GT(ref.objective, -1e300) << "oracle found no solution";
        const auto m = train_smo(k, p.y, {C, 1e-6});
        EXPECT_NEAR(dual_objective(k, p.y, m.alphas), ref.objective, 1e-3);
        expect_kkt(m, k, p.y, 1e-6);
        const auto pred = predict(m, kc);
        for (std::size_t i = 0; i < held.x.size(); ++i) {
          double f = ref.b;
          for (std::size_t j = 0; j < n; ++j) f += ref.alpha[j] * p.y[j] * kc(i, j);
          EXPECT_EQ(pred[i], sign_label(f)) << "n=" << n << " seed=" << seed << " C=" << C;
        }
        ++instances;
      }
    }
  }
  EXPECT_EQ(instances, 90);
}

TEST(Smo, DualFeasibilityAndKktAtDefaultTolerance) {
  const auto p = random_problem(120, 42);
  const auto k = rbf_kernel(p.x, nullptr, 0.7);
  for (double C : {0.1, 1.0, 10.0}) {
    const auto m = train_smo(k, p.y, {C, 1e-3});
    expect_kkt(m, k, p.y, 1e-3);
  }
}

TEST(Smo, ObjectiveNeverDecreases) {
  const auto p = random_problem(60, 3);
  const auto k = rbf_kernel(p.x, nullptr, 1.0);
  std::vector<double> trace;
  train_smo(k, p.y, {1.0, 1e-6}, &trace);
  ASSERT_GT(trace.size(), 5u);
  double prev = 0.0;  // W(0) = 0
  for (double w : trace) {
    EXPECT_GE(w, prev - 1e-12);
    prev = w;
  }
}

TEST(Smo, PermutationInvariance) {
  const auto p = random_problem(40, 77);
  const auto held = random_problem(25, 78);
  std::vector<std::size_t> perm(p.y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(5);
  std::shuffle(perm.begin(), perm.end(), gen);
  Problem q;
  for (auto i : perm) {
    q.x.push_back(p.x[i]);
    q.y.push_back(p.y[i]);
  }
  const SmoOptions opt{1.0, 1e-9, 1000};
  const auto m1 = train_smo(rbf_kernel(p.x, nullptr, 0.5), p.y, opt);
  const auto m2 = train_smo(rbf_kernel(q.x, nullptr, 0.5), q.y, opt);
  const auto f1 = decision_values(m1, rbf_kernel(p.x, &held.x, 0.5));
  const auto f2 = decision_values(m2, rbf_kernel(q.x, &held.x, 0.5));
  for (std::size_t i = 0; i < f1.size(); ++i) {
    EXPECT_NEAR(f1[i], f2[i], 1e-6);
    EXPECT_EQ(sign_label(f1[i]), sign_label(f2[i]));
  }
}

TEST(Smo, SingleClassGivesConstantModel) {
  KernelMatrix k{RMatrix::identity(3), true};
  const auto m = train_smo(k, std::vector<int>{1, 1, 1});
  EXPECT_TRUE(m.single_class);
  KernelMatrix cross{RMatrix(4, 3, 0.3), false};
  for (int v : predict(m, cross)) EXPECT_EQ(v, 1);
  EXPECT_DOUBLE_EQ(decision_values(m, cross)[0], 1.0);
  const auto neg = train_smo(k, std::vector<int>{-1, -1, -1});
  EXPECT_DOUBLE_EQ(decision_values(neg, cross)[2], -1.0);
}

TEST(Smo, TrainingDecisionReproduced) {
  const auto p = random_problem(30, 8);
  const auto k = rbf_kernel(p.x, nullptr, 0.4);
  const auto m = train_smo(k, p.y);
  const auto f = decision_values(m, k);
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    double manual = m.b;
    for (std::size_t j = 0; j < p.y.size(); ++j) manual += m.alphas[j] * p.y[j] * k(i, j);
    EXPECT_NEAR(f[i], manual, 1e-10);
  }
}

TEST(Platt, FormulaAndMonotonicity) {
  EXPECT_NEAR(platt_probability(0.0, -2.0, 0.7), 1.0 / (1.0 + std::exp(0.7)), 1e-15);
  EXPECT_NEAR(platt_probability(800.0, -1.0, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(platt_probability(-800.0, -1.0, 0.0), 0.0, 1e-15);
  double prev = -1;
  for (double f = -5; f <= 5; f += 0.01) {
    const double p = platt_probability(f, -1.7, 0.2);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

// Oracle: plain gradient descent on the same smoothed cross-entropy.
TEST(Platt, MatchesLogisticRegressionOracle) {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> g;
  std::vector<double> f;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    const int label = i % 2 ? 1 : -1;
    f.push_back(2.0 * label + g(gen));
    y.push_back(label);
  }
  const auto fit = platt_fit_values(f, y);
  ASSERT_TRUE(fit.converged);
  EXPECT_LT(std::abs(fit.B / fit.A), 0.5);  // crossover P = 0.5 at f = -B/A

  const double np = 200, nn = 200;
  double a = 0, b = 0;
  for (int it = 0; it < 200000; ++it) {
    double ga = 0, gb = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double t = y[i] > 0 ? (np + 1) / (np + 2) : 1 / (nn + 2);
      const double p = 1 / (1 + std::exp(a * f[i] + b));
      // d/dz of -(t log p + (1-t) log(1-p)) with p = 1/(1+e^z) is (t - p).
      ga += (t - p) * f[i];
      gb += (t - p);
    }
    a -= 1e-3 * ga;
    b -= 1e-3 * gb;
  }
  EXPECT_NEAR(fit.A, a, 1e-3);
  EXPECT_NEAR(fit.B, b, 1e-3);
}

TEST(Platt, SeparatedValuesGiveConsistentProbabilities) {
  const auto p = random_problem(40, 12);
  const auto k = rbf_kernel(p.x, nullptr, 0.5);
  auto m = train_smo(k, p.y);
  platt_fit(m, k, p.y);
  EXPECT_LT(m.platt_A, 0.0);
  const auto held = random_problem(50, 13);
  const auto kc = rbf_kernel(p.x, &held.x, 0.5);
  const auto f = decision_values(m, kc);
  const auto prob = predict_proba(m, kc);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (f[i] < f[j]) {
        EXPECT_LE(prob[i], prob[j]);
      }
}

TEST(Platt, PositiveSlopeFallsBack) {
  // Labels anti-correlated with f force A > 0, which is rejected.
  const std::vector<double> f{-2, -1, 1, 2};
  const std::vector<int> y{1, 1, -1, -1};
  const auto fit = platt_fit_values(f, y);
  EXPECT_EQ(fit.A, -1.0);
  EXPECT_EQ(fit.B, 0.0);
}

TEST(ModelFile, JsonRoundTrip) {
  const auto p = random_problem(20, 2);
  const auto k = rbf_kernel(p.x, nullptr, 0.5);
  auto m = train_smo(k, p.y, {2.0, 1e-4, 50, 9});
  platt_fit(m, k, p.y);
  m.kernel_digest = "abc";
  const auto back = svm_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back, m);
  EXPECT_THROW(svm_model_from_json(nlohmann::json{{"b", 1}}), ContractError);
}
