#include "sdid/bench_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace sdid {

const char* to_string(Stage stage) {
  return stage == Stage::Intact ? "intact" : "damaged";
}

ModelDefinition truss31_definition() {
  ModelDefinition def;
  def.kind = ModelKind::PlanarTruss;
  def.elastic_modulus = 70e9;
  def.cross_section_area = 25e-4;
  def.density = 2770.0;
  constexpr Index kPanels = 6;
  constexpr double kSpacing = 2.0;
  constexpr double kHeight = 2.0;
  for (Index i = 0; i <= kPanels; ++i) def.nodes.push_back({kSpacing * static_cast<double>(i), 0.0});
  for (Index i = 0; i <= kPanels; ++i) {
    def.nodes.push_back({kSpacing * static_cast<double>(i), kHeight});
  }
  const Index top = kPanels + 1;
  for (Index i = 0; i < kPanels; ++i) def.bars.push_back({i, i + 1});
  for (Index i = 0; i < kPanels; ++i) def.bars.push_back({top + i, top + i + 1});
  for (Index i = 0; i <= kPanels; ++i) def.bars.push_back({i, top + i});
  for (Index i = 0; i < kPanels; ++i) {
    def.bars.push_back({i, top + i + 1});
    def.bars.push_back({i + 1, top + i});
  }
  def.supports = {0, 1, 2 * kPanels + 1};
  return def;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ParameterVector uniform_variation(Index n, double half_width, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, 0x1a7ac7, 0));
  std::uniform_real_distribution<double> u(-half_width, half_width);
  ParameterVector theta(n);
  for (Index i = 0; i < n; ++i) theta(i) = u(rng);
  return theta;
}

std::vector<Index> biaxial_sensors(const AssembledSystem& sys, std::initializer_list<Index> nodes_1based) {
  std::vector<Index> dofs;
  for (Index node : nodes_1based) {
    dofs.push_back(sys.reduced_dof(2 * (node - 1)));
    dofs.push_back(sys.reduced_dof(2 * (node - 1) + 1));
  }
  return dofs;
}

}  // namespace

Scenario make_scenario(const std::string& name, const ScenarioOverrides& ov) {
  Scenario sc;
  sc.name = name;
  sc.seed = ov.seed.value_or(0);
  double variation = 0.0;
  if (name == "shear10") {
    sc.model = ModelDefinition::shear_building(10, 176.729e6, 100e3);
    sc.n_modes = 3;
    sc.sensor_dofs = {0, 2, 4, 6, 8};
    variation = 0.2;
    sc.theta_dmg_true = ParameterVector::Zero(10);
    sc.theta_dmg_true(0) = -0.28;
    sc.theta_dmg_true(2) = -0.33;
    sc.noise_level = 0.10;
    sc.n_observations = 5;
    sc.damping_ratios = {0.02, 0.02};
  } else if (name == "truss31") {
    sc.model = truss31_definition();
    const AssembledSystem sys = assemble(sc.model);
    sc.n_modes = 10;
    sc.sensor_dofs = biaxial_sensors(sys, {2, 3, 5, 8, 9, 12, 13});
    variation = 0.1;
    sc.theta_dmg_true = ParameterVector::Zero(31);
    sc.theta_dmg_true(0) = -0.20;
    sc.theta_dmg_true(14) = -0.15;
    sc.theta_dmg_true(26) = -0.15;
    sc.noise_level = 0.10;
    sc.n_observations = 1;
    sc.damping_ratios = {0.01, 0.02};
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
  }
  const Index n_ele = sc.theta_dmg_true.size();
  sc.theta_intact_true = uniform_variation(n_ele, variation, sc.seed);

  if (ov.noise_level) sc.noise_level = *ov.noise_level;
  if (ov.n_observations) sc.n_observations = *ov.n_observations;
  if (ov.n_modes) sc.n_modes = *ov.n_modes;
  if (ov.sensor_dofs) sc.sensor_dofs = *ov.sensor_dofs;
  if (ov.theta_intact_true) sc.theta_intact_true = *ov.theta_intact_true;
  if (ov.theta_dmg_true) sc.theta_dmg_true = *ov.theta_dmg_true;
  if (ov.calibration) sc.calibration = *ov.calibration;
  validate(sc);
  return sc;
}

void validate(const Scenario& sc) {
  sdid::validate(sc.model);
  const AssembledSystem sys = assemble(sc.model);
  if (sc.theta_intact_true.size() != sys.n_ele() || sc.theta_dmg_true.size() != sys.n_ele()) {
    throw Error(ErrorCode::InvalidArgument, "scenario parameter vectors must have n_ele entries");
  }
  check_parameters(sys, sc.theta_intact_true);
  check_parameters(sys, sc.theta_dmg_true);
  if (!(sc.noise_level >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise level must be >= 0");
  if (sc.n_observations < 1) throw Error(ErrorCode::InvalidArgument, "need at least one observation");
  if (sc.n_modes < 1 || sc.n_modes > sys.n_dof()) {
    throw Error(ErrorCode::InvalidArgument, "number of modes must be in [1, n_dof]");
  }
  std::vector<Index> s = sc.sensor_dofs;
  std::sort(s.begin(), s.end());
  if (s.empty() || std::adjacent_find(s.begin(), s.end()) != s.end() || s.front() < 0 ||
      s.back() >= sys.n_dof()) {
    throw Error(ErrorCode::InvalidArgument, "sensor DOFs must be distinct and within [0, n_dof)");
  }
}

ParameterVector true_theta(const Scenario& sc, Stage stage) {
  if (stage == Stage::Intact) return sc.theta_intact_true;
  return ((1.0 + sc.theta_intact_true.array()) * (1.0 + sc.theta_dmg_true.array()) - 1.0).matrix();
}

std::vector<ModalData> synth_measurements(const Scenario& sc, Stage stage) {
  validate(sc);
  const AssembledSystem sys = assemble(sc.model);
  const ModalData clean =
      solve_modes(apply_parameters(sys, true_theta(sc, stage)), sys.mass, sc.n_modes, sc.sensor_dofs);

  std::vector<ModalData> out;
  out.reserve(static_cast<size_t>(sc.n_observations));
  const std::uint64_t stage_id = stage == Stage::Intact ? 1 : 2;
  for (Index obs = 0; obs < sc.n_observations; ++obs) {
    ModalData m = clean;
    if (sc.noise_level > 0.0) {
      std::mt19937_64 rng(stream_seed(sc.seed, stage_id, static_cast<std::uint64_t>(obs)));
      std::normal_distribution<double> e_lambda(0.0, sc.calibration.c_lambda * sc.noise_level);
      std::normal_distribution<double> e_phi(0.0, sc.calibration.c_phi * sc.noise_level);
      for (Index j = 0; j < m.n_modes(); ++j) m.eigenvalues(j) *= 1.0 + e_lambda(rng);
      for (Index j = 0; j < m.n_modes(); ++j) {
        const double rms = std::sqrt(clean.shapes.col(j).squaredNorm() /
                                     static_cast<double>(clean.shapes.rows()));
        for (Index s = 0; s < m.shapes.rows(); ++s) m.shapes(s, j) += e_phi(rng) * rms;
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace sdid
