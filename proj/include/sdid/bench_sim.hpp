#pragma once

#include "sdid/structural_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdid {

enum class Stage { Intact, Damaged };

const char* to_string(Stage stage);

/// Maps the relative noise level onto modal perturbations:
///   lambda <- lambda (1 + e_l),           e_l ~ N(0, c_lambda * noise)
///   phi    <- phi + e_p * RMS(phi column), e_p ~ N(0, c_phi * noise)
struct NoiseCalibration {
  double c_lambda = 0.1;
  double c_phi = 0.1;
};

struct Scenario {
  std::string name;
  ModelDefinition model;
  /// Fabrication variation of the intact structure.
  ParameterVector theta_intact_true;
  /// Damage relative to the intact structure.
  ParameterVector theta_dmg_true;
  Index n_modes = 0;
  /// Reduced-coordinate DOFs carrying a sensor.
  std::vector<Index> sensor_dofs;
  double noise_level = 0.0;
  Index n_observations = 1;
  std::uint64_t seed = 0;
  NoiseCalibration calibration;
  /// Recorded only; the modal-domain generator has no damping.
  std::vector<double> damping_ratios;
};

struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_level;
  std::optional<Index> n_observations;
  std::optional<Index> n_modes;
  std::optional<std::vector<Index>> sensor_dofs;
  std::optional<ParameterVector> theta_intact_true;
  std::optional<ParameterVector> theta_dmg_true;
  std::optional<NoiseCalibration> calibration;
};

/// Canonical 31-bar truss: 7 lower-chord nodes at 2 m spacing, 7 upper-chord
/// nodes 2 m above them, verticals and crossed diagonals in all 6 panels. Pin
/// at node 1, roller at node 7. Bars are numbered lower chord (1-6), upper
/// chord (7-12), verticals (13-19), then the two diagonals of each panel.
ModelDefinition truss31_definition();

/// Known names: "shear10", "truss31". Anything else throws InvalidArgument.
Scenario make_scenario(const std::string& name, const ScenarioOverrides& overrides = {});

/// Checks scenario invariants against the assembled model.
void validate(const Scenario& scenario);

/// Element factors (1 + intact)(1 + damage) - 1 for the damaged stage, intact otherwise.
ParameterVector true_theta(const Scenario& scenario, Stage stage);

std::vector<ModalData> synth_measurements(const Scenario& scenario, Stage stage);

}  // namespace sdid
