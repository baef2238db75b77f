#pragma once

#include "sdid/structural_model.hpp"

#include <span>
#include <utility>

namespace sdid {

/// Row weights of the sensitivity equation. Eigenvalue rows are relative
/// residues scaled by beta_lambda; shape rows are raw mass-normalized shape
/// residues scaled by beta_phi.
struct SensitivityWeights {
  double beta_lambda = 1.0;
  double beta_phi = 1.0;
};

/// Overall residue scale of the default weights. The damage loss adds
/// 0.001 cond(S) per active element to |r|, so the scale of r sets how much
/// misfit an extra element has to explain.
inline constexpr double kDefaultResidueScale = 3.0;

/// beta_lambda = kDefaultResidueScale and
/// beta_phi = kDefaultResidueScale * sqrt(mean nodal mass); the shape rows are
/// then dimensionless and on the same footing as the relative eigenvalue rows.
SensitivityWeights default_weights(const AssembledSystem& sys);

/// Residue r and Jacobian S of r = S * dtheta for one iteration. Rows are
/// mode-major: [lambda_1, phi_1(sensors...), lambda_2, phi_2(...), ...].
struct SensitivitySystem {
  Vector residue;
  Matrix jacobian;
  double beta_lambda = 1.0;
  double beta_phi = 1.0;
  Index n_modes = 0;
  Index n_sensors = 0;

  Index rows() const { return residue.size(); }
  Index n_ele() const { return jacobian.cols(); }
};

/// d lambda_j / d theta_i = phi_j' K0^i phi_j for mass-normalized phi_j.
double eigenvalue_derivative(const AssembledSystem& sys, const Eigen::Ref<const Vector>& phi,
                             Index element);

/// Full-basis modal superposition:
///   d phi_j / d theta_i = sum_{r != j} (phi_r' K0^i phi_j) / (lambda_j - lambda_r) phi_r.
Vector eigenvector_derivative(const AssembledSystem& sys, const ModalBasis& modes, Index j,
                              Index element);

double modal_assurance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

struct ModeMatch {
  /// Model mode paired with each measured mode.
  std::vector<Index> model_index;
  /// +1 or -1, applied to the model shape so that phi_meas' phi_model >= 0.
  std::vector<double> sign;
  std::vector<double> mac;
};

inline constexpr double kMinAcceptedMac = 0.5;

/// Greedy MAC pairing: the highest-MAC (measured, model) pair is fixed first,
/// ties broken by relative eigenvalue proximity.
ModeMatch match_modes(const ModalData& measured, const ModalData& model);

/// Reorders and sign-flips `model` according to `match`.
ModalData apply_match(const ModalData& model, const ModeMatch& match);

SensitivitySystem assemble_sensitivity(const AssembledSystem& sys, const ParameterVector& theta,
                                       const ModalData& measured, const SensitivityWeights& weights);

/// Vertically stacks residues and Jacobians of several observations.
std::pair<Vector, Matrix> stack(std::span<const SensitivitySystem> systems);

}  // namespace sdid
