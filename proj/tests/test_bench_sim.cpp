#include "sdid/bench_sim.hpp"
#include "sdid/io.hpp"
#include "sdid/sensitivity.hpp"

#include <gtest/gtest.h>

using namespace sdid;

TEST(Scenarios, Shear10Setup) {
  const Scenario sc = make_scenario("shear10");
  const AssembledSystem sys = assemble(sc.model);
  EXPECT_EQ(sys.n_ele(), 10);
  EXPECT_EQ(sc.sensor_dofs, (std::vector<Index>{0, 2, 4, 6, 8}));
  EXPECT_EQ(sc.n_modes, 3);
  EXPECT_EQ(sc.n_observations, 5);
  EXPECT_DOUBLE_EQ(sc.noise_level, 0.10);
  EXPECT_DOUBLE_EQ(sc.theta_dmg_true(0), -0.28);
  EXPECT_DOUBLE_EQ(sc.theta_dmg_true(2), -0.33);
  EXPECT_EQ(count_nonzero(sc.theta_dmg_true), 2);
  EXPECT_LE(sc.theta_intact_true.cwiseAbs().maxCoeff(), 0.2);
  const auto obs = synth_measurements(sc, Stage::Intact);
  const SensitivitySystem s = assemble_sensitivity(sys, Vector::Zero(10), obs[0], default_weights(sys));
  EXPECT_EQ(s.rows(), 18);
}

TEST(Scenarios, Truss31Setup) {
  const Scenario sc = make_scenario("truss31");
  const AssembledSystem sys = assemble(sc.model);
  EXPECT_EQ(sys.n_ele(), 31);
  EXPECT_EQ(sc.sensor_dofs.size(), 14u);
  EXPECT_EQ(sc.n_observations, 1);
  EXPECT_EQ(support_of(sc.theta_dmg_true), (std::vector<Index>{0, 14, 26}));
  EXPECT_LE(sc.theta_intact_true.cwiseAbs().maxCoeff(), 0.1);
  // Node 2 x/y are the first sensors: full DOFs 2 and 3.
  EXPECT_EQ(sys.free_dofs[static_cast<size_t>(sc.sensor_dofs[0])], 2);
  EXPECT_EQ(sys.free_dofs[static_cast<size_t>(sc.sensor_dofs[1])], 3);
}

TEST(Scenarios, UnknownNameRejected) { EXPECT_THROW(make_scenario("bridge"), Error); }

TEST(Scenarios, ShippedTrussGeometryMatchesBuiltIn) {
  const ModelDefinition file = read_model(std::string(SDID_DATA_DIR) + "/truss31.json");
  const ModelDefinition built = truss31_definition();
  ASSERT_EQ(file.nodes.size(), built.nodes.size());
  ASSERT_EQ(file.bars.size(), 31u);
  for (size_t i = 0; i < built.nodes.size(); ++i) {
    EXPECT_EQ(file.nodes[i].x, built.nodes[i].x);
    EXPECT_EQ(file.nodes[i].y, built.nodes[i].y);
  }
  for (size_t b = 0; b < built.bars.size(); ++b) {
    EXPECT_EQ(file.bars[b].node_a, built.bars[b].node_a);
    EXPECT_EQ(file.bars[b].node_b, built.bars[b].node_b);
  }
  EXPECT_EQ(file.supports, built.supports);
  EXPECT_EQ(file.elastic_modulus, built.elastic_modulus);
}

TEST(Measurements, ZeroNoiseIsExact) {
  ScenarioOverrides ov;
  ov.noise_level = 0.0;
  const Scenario sc = make_scenario("shear10", ov);
  const AssembledSystem sys = assemble(sc.model);
  const ModalData truth = solve_modes(apply_parameters(sys, true_theta(sc, Stage::Damaged)),
                                      sys.mass, 3, sc.sensor_dofs);
  for (const auto& m : synth_measurements(sc, Stage::Damaged)) {
    EXPECT_EQ(m.eigenvalues, truth.eigenvalues);
    EXPECT_EQ(m.shapes, truth.shapes);
  }
}

TEST(Measurements, DeterministicPerSeedAndIndex) {
  const Scenario sc = make_scenario("shear10", {.seed = 21});
  const auto a = synth_measurements(sc, Stage::Intact);
  const auto b = synth_measurements(sc, Stage::Intact);
  ASSERT_EQ(a.size(), 5u);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].shapes, b[i].shapes);
  EXPECT_NE(a[0].eigenvalues, a[1].eigenvalues);
  const auto d = synth_measurements(sc, Stage::Damaged);
  EXPECT_NE(a[0].eigenvalues, d[0].eigenvalues);
  const Scenario other = make_scenario("shear10", {.seed = 22});
  EXPECT_NE(other.theta_intact_true, sc.theta_intact_true);
}

TEST(Measurements, EigenvalueNoiseStatistics) {
  ScenarioOverrides ov;
  ov.seed = 5;
  ov.n_observations = 3334;
  const Scenario sc = make_scenario("shear10", ov);
  const AssembledSystem sys = assemble(sc.model);
  const ModalData clean = solve_modes(apply_parameters(sys, sc.theta_intact_true), sys.mass, 3,
                                      sc.sensor_dofs);
  std::vector<double> eps;
  for (const auto& m : synth_measurements(sc, Stage::Intact)) {
    for (Index j = 0; j < 3; ++j) eps.push_back(m.eigenvalues(j) / clean.eigenvalues(j) - 1.0);
  }
  ASSERT_GE(eps.size(), 10000u);
  double mean = 0.0;
  for (double e : eps) mean += e;
  mean /= static_cast<double>(eps.size());
  double var = 0.0;
  for (double e : eps) var += (e - mean) * (e - mean);
  const double sd = std::sqrt(var / static_cast<double>(eps.size() - 1));
  const double expected = sc.calibration.c_lambda * sc.noise_level;
  EXPECT_NEAR(sd, expected, 0.03 * expected);
}

TEST(Measurements, DamageComposesWithIntactVariation) {
  const Scenario sc = make_scenario("shear10", {.seed = 2});
  const ParameterVector t = true_theta(sc, Stage::Damaged);
  EXPECT_NEAR(t(0), (1 + sc.theta_intact_true(0)) * 0.72 - 1, 1e-15);
  EXPECT_NEAR(t(1), sc.theta_intact_true(1), 1e-15);
  EXPECT_EQ(true_theta(sc, Stage::Intact), sc.theta_intact_true);
}

TEST(Measurements, InvalidOverridesRejected) {
  ScenarioOverrides ov;
  ov.sensor_dofs = std::vector<Index>{0, 0};
  EXPECT_THROW(make_scenario("shear10", ov), Error);
  ScenarioOverrides neg;
  neg.noise_level = -0.1;
  EXPECT_THROW(make_scenario("shear10", neg), Error);
}
