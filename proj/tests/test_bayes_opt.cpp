#include "sdid/bayes_opt.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <random>

using namespace sdid;

TEST(Matern52, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(matern52(0.3, 0.3, 2.0, 0.5), 2.0);
  const double s5 = std::sqrt(5.0);
  EXPECT_NEAR(matern52(0.0, 0.5, 1.5, 0.5), 1.5 * (1 + s5 + 5.0 / 3.0) * std::exp(-s5), 1e-15);
  EXPECT_DOUBLE_EQ(matern52(0.1, 0.7, 1.0, 0.2), matern52(0.7, 0.1, 1.0, 0.2));
}

TEST(ExpectedImprovement, MatchesMonteCarlo) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  const int kSamples = 1000000;
  const double mean = 0.4, sd = 0.3, best = 0.5;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double g = std::max(0.0, best - (mean + sd * n(rng)));
    sum += g;
    sum_sq += g * g;
  }
  const double mc = sum / kSamples;
  const double se = std::sqrt((sum_sq / kSamples - mc * mc) / kSamples);
  EXPECT_NEAR(expected_improvement(mean, sd, best), mc, 4 * se);
}

TEST(ExpectedImprovement, DegenerateSpread) {
  EXPECT_DOUBLE_EQ(expected_improvement(0.2, 0.0, 0.5), 0.3);
  EXPECT_DOUBLE_EQ(expected_improvement(0.7, 0.0, 0.5), 0.0);
  EXPECT_GT(expected_improvement(0.7, 0.1, 0.5), 0.0);
}

TEST(GaussianProcess, InterpolatesConditioningData) {
  const std::vector<double> x{0.1, 0.3, 0.55, 0.8};
  const std::vector<double> y{1.0, 0.2, 0.5, 0.9};
  GpHyperparameters h;
  h.kernel_scale = 0.5;
  h.length_scale = 0.2;
  h.noise_variance = 1e-10;
  h.mean_const = 0.65;
  const GPSurrogate gp = gp_condition(x, y, h);
  for (size_t i = 0; i < x.size(); ++i) {
    const auto [m, v] = gp_posterior(gp, x[i]);
    EXPECT_NEAR(m, y[i], 1e-6);
    EXPECT_LT(v, 1e-6);
  }
  const auto [m_far, v_far] = gp_posterior(gp, 50.0);
  EXPECT_NEAR(m_far, 0.65, 1e-9);
  EXPECT_NEAR(v_far, 0.5, 1e-9);
}

TEST(GaussianProcess, LogMarginalLikelihoodMatchesDenseFormula) {
  const std::vector<double> x{0.0, 0.2, 0.5};
  const std::vector<double> y{0.3, -0.1, 0.4};
  GpHyperparameters h{0.8, 0.3, 0.01, 0.2};
  Matrix k(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k(i, j) = matern52(x[i], x[j], 0.8, 0.3) + (i == j ? 0.01 : 0.0);
  Vector d(3);
  for (int i = 0; i < 3; ++i) d(i) = y[i] - 0.2;
  const double expected = -0.5 * d.dot(k.ldlt().solve(d)) - 0.5 * std::log(k.determinant()) -
                          1.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(gp_log_marginal_likelihood(x, y, h), expected, 1e-10);
}

TEST(GaussianProcess, RecoversLengthScaleOfSampledPaths) {
  // Paths drawn from a known Matern GP; the fitted length scale should land
  // within a factor 3 of the truth in most trials.
  const double l_true = 0.25;
  int within = 0;
  const int kTrials = 50;
  for (int t = 0; t < kTrials; ++t) {
    std::mt19937_64 rng(100 + t);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(25);
    for (auto& v : x) v = u(rng);
    Matrix k(25, 25);
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 25; ++j) k(i, j) = matern52(x[i], x[j], 1.0, l_true) + (i == j ? 1e-8 : 0.0);
    const Matrix l = k.llt().matrixL();
    Vector z(25);
    for (int i = 0; i < 25; ++i) z(i) = n(rng);
    const Vector f = l * z;
    const std::vector<double> y(f.data(), f.data() + 25);
    const double l_fit = gp_fit(x, y, t).hyper.length_scale;
    within += (l_fit > l_true / 3 && l_fit < l_true * 3);
  }
  EXPECT_GE(within, 40);
}

TEST(BayesMinimize, FindsMinimumOfSmoothFunction) {
  const auto f = [](double x) { return (x - 0.37) * (x - 0.37) + 0.1; };
  const ScalarOptimum opt = bayes_minimize(f, {}, 3);
  EXPECT_NEAR(opt.x_best, 0.37, 0.01);
  EXPECT_EQ(opt.trace.size(), 34u);
  for (size_t i = 1; i < opt.trace.size(); ++i) {
    EXPECT_LE(opt.trace[i].incumbent, opt.trace[i - 1].incumbent);
  }
  EXPECT_EQ(opt.trace[opt.best_eval].loss, opt.f_best);
}

TEST(BayesMinimize, FindsNarrowPlateauOfStepFunction) {
  // Piecewise-constant losses as produced by thresholding: a flat surface
  // with a lower plateau that the random start points miss.
  const auto f = [](double x) { return (x > 0.15 && x < 0.3) ? 0.11 : (x < 0.05 ? 0.2185 : 0.2186); };
  OptBudget b;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScalarOptimum opt = bayes_minimize(f, b, seed);
    EXPECT_EQ(opt.f_best, 0.11) << "seed " << seed;
  }
}

TEST(BayesMinimize, DeterministicAndWithinBounds) {
  const auto f = [](double x) { return std::sin(12 * x) + x; };
  OptBudget b;
  b.lambda_min = 0.2;
  b.lambda_max = 0.6;
  const ScalarOptimum a = bayes_minimize(f, b, 8);
  const ScalarOptimum c = bayes_minimize(f, b, 8);
  ASSERT_EQ(a.trace.size(), c.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].lambda, c.trace[i].lambda);
    EXPECT_GE(a.trace[i].lambda, 0.2);
    EXPECT_LE(a.trace[i].lambda, 0.6);
  }
  b.lambda_max = 0.1;
  EXPECT_THROW(bayes_minimize(f, b, 0), Error);
}

TEST(BayesOpt, ReturnsStlsSolutionAtSelectedThreshold) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix S(30, 8);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 8; ++j) S(i, j) = n(rng);
  Vector truth = Vector::Zero(8);
  truth(2) = -0.3;
  truth(6) = -0.2;
  const Vector r = S * truth;
  const ThresholdSelection sel = bayes_opt(r, S, {}, 2);
  const SparseSolution again = stls(r, S, sel.lambda_best, {}, 2);
  EXPECT_EQ(sel.solution.delta_theta, again.delta_theta);
  EXPECT_EQ(sel.solution.support, (std::vector<Index>{2, 6}));
  EXPECT_EQ(sel.trace.size(), 34u);
}
