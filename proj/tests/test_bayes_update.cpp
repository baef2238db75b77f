#include "sdid/bayes_update.hpp"
#include "sdid/bench_sim.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sdid;

namespace {

std::vector<SensitivitySystem> random_systems(Index n_ob, Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector truth(cols);
  for (Index i = 0; i < cols; ++i) truth(i) = 0.1 * n(rng);
  std::vector<SensitivitySystem> out(static_cast<size_t>(n_ob));
  for (auto& s : out) {
    s.jacobian.resize(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) s.jacobian(r, c) = n(rng);
    s.residue = s.jacobian * truth;
    for (Index r = 0; r < rows; ++r) s.residue(r) += 0.05 * n(rng);
  }
  return out;
}

Scenario noiseless_full_shear10() {
  ScenarioOverrides ov;
  ov.seed = 11;
  ov.noise_level = 0.0;
  ov.n_modes = 10;
  ov.n_observations = 1;
  ov.sensor_dofs = all_dofs(10);
  return make_scenario("shear10", ov);
}

}  // namespace

TEST(MapFixedPoint, ObjectiveNeverIncreases) {
  const auto sys = random_systems(3, 12, 5, 1);
  const HyperPriors hp;
  FixedPointTrace trace;
  const MapIterate it = map_fixed_point(sys, hp, initial_iterate(sys, hp), 1e-12, 500, &trace);
  ASSERT_GE(trace.objective.size(), 2u);
  for (size_t k = 1; k < trace.objective.size(); ++k) {
    EXPECT_LE(trace.objective[k], trace.objective[k - 1] + 1e-12 * std::abs(trace.objective[k - 1]));
  }
  EXPECT_TRUE(it.converged);
}

TEST(MapFixedPoint, ConvergedIterateSatisfiesStationarity) {
  // Independent restatement of the three block optimality conditions.
  const auto sys = random_systems(2, 10, 4, 2);
  HyperPriors hp;
  hp.a0 = 2.0;
  hp.b0 = 0.01;
  hp.a1 = 1.5;
  hp.b1 = 0.05;
  const MapIterate it = map_fixed_point(sys, hp, initial_iterate(sys, hp), 1e-13, 2000);
  ASSERT_TRUE(it.converged);
  Matrix g = Matrix::Zero(4, 4);
  Vector rhs = Vector::Zero(4);
  double q = 0.0;
  Index rows = 0;
  for (const auto& s : sys) {
    g += s.jacobian.transpose() * s.jacobian;
    rhs += s.jacobian.transpose() * s.residue;
    q += (s.jacobian * it.delta_theta - s.residue).squaredNorm();
    rows += s.rows();
  }
  const Vector dtheta = (g + it.sigma2 / it.alpha * Matrix::Identity(4, 4)).ldlt().solve(rhs);
  EXPECT_LT((dtheta - it.delta_theta).norm(), 1e-9 * dtheta.norm());
  EXPECT_NEAR(it.sigma2, (q + 2 * hp.b0) / (rows + 2 * (hp.a0 + 1)), 1e-9 * it.sigma2);
  EXPECT_NEAR(it.alpha, (it.delta_theta.squaredNorm() + 2 * hp.b1) / (4.0 / 2 + hp.a1 + 1),
              1e-9 * it.alpha);
}

TEST(PosteriorCovariance, EqualsObservationCountTimesInverseHessian) {
  const auto sys = random_systems(4, 8, 3, 3);
  const HyperPriors hp;
  const MapIterate it = map_fixed_point(sys, hp, initial_iterate(sys, hp));
  const double h = 1e-4;
  Matrix hess(3, 3);
  for (Index a = 0; a < 3; ++a) {
    for (Index b = 0; b < 3; ++b) {
      auto j = [&](double da, double db) {
        Vector x = it.delta_theta;
        x(a) += da;
        x(b) += db;
        return map_objective(sys, hp, x, it.sigma2, it.alpha);
      };
      hess(a, b) = (j(h, h) - j(h, -h) - j(-h, h) + j(-h, -h)) / (4 * h * h);
    }
  }
  const Matrix expected = 4.0 * hess.inverse();
  const Matrix cov = posterior_covariance(sys, it);
  EXPECT_LT((cov - expected).norm(), 1e-5 * expected.norm());
}

TEST(Marginals, MonteCarloRecoversMoments) {
  Vector mean(2);
  mean << 0.3, -0.1;
  Matrix cov(2, 2);
  cov << 0.04, 0.01, 0.01, 0.09;
  const auto fits = marginal_posteriors(mean, cov, 200000, 9);
  EXPECT_NEAR(fits[0].mean, 0.3, 4 * 0.2 / std::sqrt(200000.0));
  EXPECT_NEAR(fits[1].std, 0.3, 0.01 * 0.3);
  EXPECT_NEAR(fits[0].std, 0.2, 0.01 * 0.2);
  // Same seed, same draws.
  const auto again = marginal_posteriors(mean, cov, 200000, 9);
  EXPECT_EQ(fits[1].mean, again[1].mean);
}

TEST(Marginals, RejectsBadInput) {
  EXPECT_THROW(marginal_posteriors(Vector::Zero(2), Matrix::Identity(2, 2), 999, 0), Error);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  try {
    marginal_posteriors(Vector::Zero(2), indefinite, 1000, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveSemiDefinite);
  }
}

TEST(HyperPriors, MustBePositive) {
  HyperPriors hp;
  hp.b1 = 0.0;
  EXPECT_THROW(validate(hp), Error);
}

TEST(ModelUpdate, NoiselessFullSensorShear10IsExact) {
  const Scenario sc = noiseless_full_shear10();
  const AssembledSystem sys = assemble(sc.model);
  UpdateOptions uo;
  uo.weights = default_weights(sys);
  uo.n_samples = 1000;
  const PosteriorEstimate est = run_model_update(sys, synth_measurements(sc, Stage::Intact), uo);
  EXPECT_TRUE(est.converged);
  EXPECT_LE(est.history.size(), 10u);
  EXPECT_LE((est.theta_hat - sc.theta_intact_true).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ModelUpdate, NoisyShear10IsDeterministicAndCorrelated) {
  const Scenario sc = make_scenario("shear10", {.seed = 4});
  const AssembledSystem sys = assemble(sc.model);
  UpdateOptions uo;
  uo.weights = default_weights(sys);
  uo.n_samples = 2000;
  uo.seed = 4;
  const auto obs = synth_measurements(sc, Stage::Intact);
  const PosteriorEstimate a = run_model_update(sys, obs, uo);
  const PosteriorEstimate b = run_model_update(sys, obs, uo);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_TRUE(a.converged);
  const Vector x = a.theta_hat.array() - a.theta_hat.mean();
  const Vector y = sc.theta_intact_true.array() - sc.theta_intact_true.mean();
  EXPECT_GT(x.dot(y) / (x.norm() * y.norm()), 0.9);
  for (const auto& p : a.per_param) EXPECT_GT(p.std, 0.0);
}
