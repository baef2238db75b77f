#pragma once

#include "sdid/types.hpp"

#include <array>
#include <vector>

namespace sdid {

enum class ModelKind { ShearBuilding, PlanarTruss };

struct TrussNode {
  double x = 0.0;
  double y = 0.0;
};

struct TrussBar {
  Index node_a = 0;
  Index node_b = 0;
};

/// Parameterized structure definition. SI units throughout (N, m, kg).
///
/// Shear buildings use one lateral DOF per floor, floor 1 first. Story i is
/// the spring between floor i-1 (the ground for i = 0) and floor i.
/// Planar trusses number node n's DOFs as 2n (x) and 2n+1 (y); `supports`
/// lists those full-numbering DOFs that are fixed.
struct ModelDefinition {
  ModelKind kind = ModelKind::ShearBuilding;

  Index n_stories = 0;
  std::vector<double> story_stiffness;
  std::vector<double> story_mass;

  std::vector<TrussNode> nodes;
  std::vector<TrussBar> bars;
  double elastic_modulus = 0.0;
  double cross_section_area = 0.0;
  double density = 0.0;
  std::vector<Index> supports;

  static ModelDefinition shear_building(Index n_stories, double stiffness, double mass);
};

/// Mass, baseline stiffness and per-element stiffness contributions in
/// reduced (constrained) coordinates. Immutable once assembled.
struct AssembledSystem {
  Matrix mass;
  Matrix k0;
  std::vector<Matrix> element_k;
  /// Full-numbering DOF of each reduced DOF.
  std::vector<Index> free_dofs;

  Index n_dof() const { return k0.rows(); }
  Index n_ele() const { return static_cast<Index>(element_k.size()); }

  /// Reduced index of a full-numbering DOF; throws if the DOF is constrained.
  Index reduced_dof(Index full_dof) const;
};

/// Dimensionless stiffness variation coefficients, one per element.
using ParameterVector = Vector;

/// All modes of K phi = lambda M phi at full DOF resolution, ascending,
/// mass-normalized. Each column's largest-magnitude entry is positive.
struct ModalBasis {
  Vector eigenvalues;
  Matrix shapes;
  bool repeated_eigenvalues = false;

  Index n_modes() const { return eigenvalues.size(); }
};

/// Modal quantities restricted to observed DOFs.
struct ModalData {
  Vector eigenvalues;
  /// n_sensors x n_modes, mass-normalized shape entries at `sensor_dofs`.
  Matrix shapes;
  std::vector<Index> sensor_dofs;
  bool repeated_eigenvalues = false;

  Index n_modes() const { return eigenvalues.size(); }
  Index n_sensors() const { return static_cast<Index>(sensor_dofs.size()); }
};

/// Relative gap below which two eigenvalues are treated as repeated.
inline constexpr double kRepeatedEigenvalueTol = 1e-8;

void validate(const ModelDefinition& def);

AssembledSystem assemble_shear_building(const ModelDefinition& def);
AssembledSystem assemble_truss(const ModelDefinition& def);
AssembledSystem assemble(const ModelDefinition& def);

/// K0 + sum_i theta_i K0^i.
Matrix apply_parameters(const AssembledSystem& sys, const ParameterVector& theta);

/// Returns a system whose element contributions are scaled by (1 + theta_i),
/// so that parameters of the result compose multiplicatively with theta.
AssembledSystem rebase(const AssembledSystem& sys, const ParameterVector& theta);

void check_parameters(const AssembledSystem& sys, const ParameterVector& theta);

ModalBasis solve_modal_basis(const Matrix& k, const Matrix& m);

ModalData restrict_modes(const ModalBasis& basis, Index n_modes,
                         const std::vector<Index>& sensor_dofs);

ModalData solve_modes(const Matrix& k, const Matrix& m, Index n_modes,
                      const std::vector<Index>& sensor_dofs);

std::vector<Index> all_dofs(Index n_dof);

}  // namespace sdid
