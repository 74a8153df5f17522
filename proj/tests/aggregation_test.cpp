#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "red/aggregation.hpp"
#include "red/gradcheck.hpp"
#include "test_util.hpp"

namespace red {
namespace {

TEST(TempPredict, ZeroStateOrWeightsGiveHalf) {
  std::mt19937_64 rng(18);
  EXPECT_DOUBLE_EQ(temp_predict(Tensor({3, 3, 2}), test::random_tensor({1, 18}, rng)), 0.5);
  EXPECT_DOUBLE_EQ(temp_predict(test::random_tensor({3, 3, 2}, rng), Tensor({1, 18})), 0.5);
}

TEST(TempPredict, ScalarCase) {
  const double y = temp_predict(Tensor({1, 1, 1}, 1.0), Tensor({1, 1}, 2.0));
  EXPECT_NEAR(y, 0.98201, 1e-5);
}

TEST(KMax, WorkedExample) {
  const std::vector<double> y{0.2, 0.9, 0.5, 0.7};
  const Aggregate a = k_max_aggregate(y, {2, 0.5, 1, 4});
  EXPECT_EQ(a.steps, (std::vector<int>{2, 4}));
  EXPECT_NEAR(a.value, (0.75 * 0.9 + 0.9375 * 0.7) / 1.6875, 1e-15);
  EXPECT_NEAR(a.value, oracle::k_max(y, 2, 0.5, 1), 1e-15);

  const auto g = aggregate_gradient(y, {2, 0.5, 1, 4});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_NEAR(g[1], 0.75 / 1.6875, 1e-15);
  EXPECT_NEAR(g[3], 0.9375 / 1.6875, 1e-15);
}

TEST(KMax, KOneIsMaxAfterWarmup) {
  const std::vector<double> y{0.99, 0.1, 0.4, 0.3, 0.35};
  const Aggregate a = k_max_aggregate(y, {1, 0.9, 2, 5});
  EXPECT_DOUBLE_EQ(a.value, 0.4);
  const auto g = aggregate_gradient(y, {1, 0.9, 2, 5});
  EXPECT_EQ(g, (std::vector<double>{0, 0, 1, 0, 0}));
}

TEST(KMax, ConstantSequenceIsFixedPoint) {
  const std::vector<double> y(30, 0.37);
  for (int k : {1, 5, 20}) {
    EXPECT_NEAR(k_max_aggregate(y, {k, 0.95, 3, 30}).value, 0.37, 1e-15);
  }
}

TEST(KMax, TiesGoToEarlierSteps) {
  const std::vector<double> y{0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(k_max_aggregate(y, {2, 0.5, 2, 4}).steps, (std::vector<int>{2, 3}));
}

TEST(KMax, TooFewCandidatesIsAConfigError) {
  EXPECT_THROW((AggregationConfig{5, 0.9, 10, 13}.validate()), ConfigError);
  EXPECT_NO_THROW((AggregationConfig{25, 0.95, 10, 350}.validate()));
  const std::vector<double> y(4, 0.5);
  EXPECT_THROW(k_max_aggregate(y, {3, 0.5, 3, 4}), ConfigError);
}

TEST(KMax, PropertiesOnRandomSequences) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 60);
  for (int trial = 0; trial < 500; ++trial) {
    const int T = len(rng);
    const int t0 = std::uniform_int_distribution<int>(1, T)(rng);
    const int k = std::uniform_int_distribution<int>(1, T - t0 + 1)(rng);
    const double gamma = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    std::vector<double> y(static_cast<std::size_t>(T));
    for (double& v : y) v = u(rng);
    const AggregationConfig cfg{k, gamma, t0, T};
    const Aggregate a = k_max_aggregate(y, cfg);
    ASSERT_GE(a.value, 0.0);
    ASSERT_LE(a.value, 1.0);
    double lo = 1.0, hi = 0.0;
    for (int t : a.steps) {
      lo = std::min(lo, y[t - 1]);
      hi = std::max(hi, y[t - 1]);
      ASSERT_GE(t, t0);
    }
    ASSERT_LE(lo, a.value + 1e-15);
    ASSERT_GE(hi, a.value - 1e-15);

    // Pre-warm-up steps never matter.
    std::vector<double> scrambled = y;
    for (int t = 1; t < t0; ++t) scrambled[t - 1] = u(rng);
    ASSERT_EQ(k_max_aggregate(scrambled, cfg).value, a.value);
    const auto g = aggregate_gradient(y, cfg);
    for (int t = 1; t < t0; ++t) ASSERT_EQ(g[t - 1], 0.0);

    // Raising a selected value never lowers the aggregate.
    std::vector<double> raised = y;
    const int pick = a.steps.front();
    raised[pick - 1] = std::min(1.0, raised[pick - 1] + 0.05);
    ASSERT_GE(k_max_aggregate(raised, cfg).value, a.value);
  }
}

TEST(KMax, GradientMatchesFiniteDifferencesAwayFromTies) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(12);
    for (double& v : y) v = u(rng);
    const AggregationConfig cfg{4, 0.8, 3, 12};
    // Skip instances whose k-th and (k+1)-th candidates are within 1e-6.
    std::vector<double> cand(y.begin() + 2, y.end());
    std::sort(cand.rbegin(), cand.rend());
    if (cand[3] - cand[4] < 1e-6) continue;
    auto f = [&](std::span<const double> p) {
      return k_max_aggregate(std::vector<double>(p.begin(), p.end()), cfg).value;
    };
    const auto g = aggregate_gradient(y, cfg);
    const auto numeric = central_difference(f, y, 1e-8);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(g[i], numeric[i], 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST(KMax, LateStepsApproachPlainMean) {
  // With t large, 1 − γ^t ≈ 1 for every selected step.
  std::vector<double> y(400, 0.0);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : y) v = u(rng);
  const Aggregate a = k_max_aggregate(y, {10, 0.9, 300, 400});
  double mean = 0.0;
  for (int t : a.steps) mean += y[t - 1] / 10.0;
  EXPECT_NEAR(a.value, mean, 1e-12);
}

TEST(KMax, TapeVersionRoutesWeights) {
  Tape t;
  std::vector<Var> ys;
  for (double v : {0.2, 0.9, 0.5, 0.7}) ys.push_back(t.leaf(Tensor::scalar(v)));
  const Var out = k_max_aggregate(t, ys, {2, 0.5, 1, 4});
  EXPECT_NEAR(t.value(out)[0], (0.75 * 0.9 + 0.9375 * 0.7) / 1.6875, 1e-15);
  t.backward(out);
  EXPECT_EQ(t.grad(ys[0])[0], 0.0);
  EXPECT_NEAR(t.grad(ys[3])[0], 0.9375 / 1.6875, 1e-15);
}

}  // namespace
}  // namespace red
