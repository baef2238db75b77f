#include "sdid/structural_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace sdid {

ModelDefinition ModelDefinition::shear_building(Index n_stories, double stiffness, double mass) {
  ModelDefinition def;
  def.kind = ModelKind::ShearBuilding;
  def.n_stories = n_stories;
  def.story_stiffness.assign(static_cast<size_t>(std::max<Index>(n_stories, 0)), stiffness);
  def.story_mass.assign(static_cast<size_t>(std::max<Index>(n_stories, 0)), mass);
  return def;
}

Index AssembledSystem::reduced_dof(Index full_dof) const {
  auto it = std::find(free_dofs.begin(), free_dofs.end(), full_dof);
  if (it == free_dofs.end()) {
    throw Error(ErrorCode::InvalidArgument,
                "DOF " + std::to_string(full_dof) + " is constrained or out of range");
  }
  return static_cast<Index>(it - free_dofs.begin());
}

namespace {

void validate_shear(const ModelDefinition& def) {
  if (def.n_stories < 1) {
    throw Error(ErrorCode::InvalidDefinition, "shear building needs at least one story");
  }
  const auto n = static_cast<size_t>(def.n_stories);
  if (def.story_stiffness.size() != n || def.story_mass.size() != n) {
    throw Error(ErrorCode::InvalidDefinition, "story stiffness/mass must have one entry per story");
  }
  for (size_t i = 0; i < n; ++i) {
    if (!(def.story_stiffness[i] > 0.0) || !(def.story_mass[i] > 0.0)) {
      throw Error(ErrorCode::InvalidDefinition,
                  "story " + std::to_string(i + 1) + " has non-positive stiffness or mass");
    }
  }
}

void validate_truss(const ModelDefinition& def) {
  const auto n_nodes = static_cast<Index>(def.nodes.size());
  if (n_nodes < 2 || def.bars.empty()) {
    throw Error(ErrorCode::InvalidDefinition, "truss needs at least two nodes and one bar");
  }
  if (!(def.elastic_modulus > 0.0) || !(def.cross_section_area > 0.0) || !(def.density > 0.0)) {
    throw Error(ErrorCode::InvalidDefinition, "material properties must be strictly positive");
  }
  for (size_t b = 0; b < def.bars.size(); ++b) {
    const auto& bar = def.bars[b];
    if (bar.node_a < 0 || bar.node_b < 0 || bar.node_a >= n_nodes || bar.node_b >= n_nodes ||
        bar.node_a == bar.node_b) {
      throw Error(ErrorCode::InvalidDefinition,
                  "bar " + std::to_string(b + 1) + " must join two distinct existing nodes");
    }
    const auto& a = def.nodes[static_cast<size_t>(bar.node_a)];
    const auto& c = def.nodes[static_cast<size_t>(bar.node_b)];
    if (!(std::hypot(c.x - a.x, c.y - a.y) > 0.0)) {
      throw Error(ErrorCode::InvalidDefinition, "bar " + std::to_string(b + 1) + " has zero length");
    }
  }
  std::vector<Index> s = def.supports;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    throw Error(ErrorCode::InvalidDefinition, "duplicate support DOF");
  }
  for (Index d : s) {
    if (d < 0 || d >= 2 * n_nodes) {
      throw Error(ErrorCode::InvalidDefinition, "support DOF " + std::to_string(d) + " out of range");
    }
  }
  if (s.size() < 3) {
    throw Error(ErrorCode::InvalidDefinition,
                "a planar truss needs at least 3 support DOFs to suppress rigid-body motion");
  }
}

}  // namespace

void validate(const ModelDefinition& def) {
  if (def.kind == ModelKind::ShearBuilding) {
    validate_shear(def);
  } else {
    validate_truss(def);
  }
}

AssembledSystem assemble_shear_building(const ModelDefinition& def) {
  if (def.kind != ModelKind::ShearBuilding) {
    throw Error(ErrorCode::InvalidDefinition, "definition is not a shear building");
  }
  validate_shear(def);
  const Index n = def.n_stories;

  AssembledSystem sys;
  sys.mass = Matrix::Zero(n, n);
  sys.k0 = Matrix::Zero(n, n);
  sys.element_k.reserve(static_cast<size_t>(n));
  sys.free_dofs.resize(static_cast<size_t>(n));
  std::iota(sys.free_dofs.begin(), sys.free_dofs.end(), Index{0});

  for (Index i = 0; i < n; ++i) {
    sys.mass(i, i) = def.story_mass[static_cast<size_t>(i)];
    const double k = def.story_stiffness[static_cast<size_t>(i)];
    Matrix ke = Matrix::Zero(n, n);
    ke(i, i) = k;
    if (i > 0) {
      ke(i - 1, i - 1) = k;
      ke(i - 1, i) = -k;
      ke(i, i - 1) = -k;
    }
    sys.element_k.push_back(std::move(ke));
  }
  for (const auto& ke : sys.element_k) sys.k0 += ke;
  return sys;
}

AssembledSystem assemble_truss(const ModelDefinition& def) {
  if (def.kind != ModelKind::PlanarTruss) {
    throw Error(ErrorCode::InvalidDefinition, "definition is not a planar truss");
  }
  validate_truss(def);

  const Index n_full = 2 * static_cast<Index>(def.nodes.size());
  std::vector<Index> reduced(static_cast<size_t>(n_full), -1);
  AssembledSystem sys;
  for (Index d = 0; d < n_full; ++d) {
    if (std::find(def.supports.begin(), def.supports.end(), d) == def.supports.end()) {
      reduced[static_cast<size_t>(d)] = static_cast<Index>(sys.free_dofs.size());
      sys.free_dofs.push_back(d);
    }
  }
  const Index n = static_cast<Index>(sys.free_dofs.size());
  sys.mass = Matrix::Zero(n, n);
  sys.k0 = Matrix::Zero(n, n);

  const double ea = def.elastic_modulus * def.cross_section_area;
  for (const auto& bar : def.bars) {
    const auto& a = def.nodes[static_cast<size_t>(bar.node_a)];
    const auto& b = def.nodes[static_cast<size_t>(bar.node_b)];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double length = std::hypot(dx, dy);
    const double c = dx / length;
    const double s = dy / length;

    const std::array<double, 4> dir{-c, -s, c, s};
    const std::array<Index, 4> dofs{2 * bar.node_a, 2 * bar.node_a + 1, 2 * bar.node_b,
                                    2 * bar.node_b + 1};
    const double k = ea / length;

    Matrix ke = Matrix::Zero(n, n);
    for (size_t p = 0; p < 4; ++p) {
      const Index rp = reduced[static_cast<size_t>(dofs[p])];
      if (rp < 0) continue;
      for (size_t q = 0; q < 4; ++q) {
        const Index rq = reduced[static_cast<size_t>(dofs[q])];
        if (rq < 0) continue;
        ke(rp, rq) += k * dir[p] * dir[q];
      }
    }
    sys.element_k.push_back(std::move(ke));

    // Lumped: half the bar mass on each end node, both directions.
    const double half_mass = 0.5 * def.density * def.cross_section_area * length;
    for (Index d : dofs) {
      const Index r = reduced[static_cast<size_t>(d)];
      if (r >= 0) sys.mass(r, r) += half_mass;
    }
  }
  for (const auto& ke : sys.element_k) sys.k0 += ke;

  for (Index i = 0; i < n; ++i) {
    if (!(sys.mass(i, i) > 0.0)) {
      throw Error(ErrorCode::Assembly,
                  "free DOF " + std::to_string(sys.free_dofs[static_cast<size_t>(i)]) +
                      " carries no mass (node without bars)");
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sys.k0, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  const auto rigid = (ev.array() <= 1e-10 * scale).count();
  if (rigid > 0) {
    throw Error(ErrorCode::Assembly, "constrained stiffness is singular: " + std::to_string(rigid) +
                                         " rigid-body/mechanism mode(s)");
  }
  return sys;
}

AssembledSystem assemble(const ModelDefinition& def) {
  return def.kind == ModelKind::ShearBuilding ? assemble_shear_building(def) : assemble_truss(def);
}

void check_parameters(const AssembledSystem& sys, const ParameterVector& theta) {
  if (theta.size() != sys.n_ele()) {
    throw Error(ErrorCode::InvalidArgument, "parameter vector has " + std::to_string(theta.size()) +
                                                " entries, expected " + std::to_string(sys.n_ele()));
  }
  for (Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta(i))) {
      throw Error(ErrorCode::NonFinite, "theta[" + std::to_string(i) + "] is not finite");
    }
    if (theta(i) <= -1.0) {
      throw Error(ErrorCode::NonPhysicalStiffness,
                  "theta[" + std::to_string(i) + "] = " + std::to_string(theta(i)) + " <= -1");
    }
  }
}

Matrix apply_parameters(const AssembledSystem& sys, const ParameterVector& theta) {
  check_parameters(sys, theta);
  Matrix k = sys.k0;
  for (Index i = 0; i < sys.n_ele(); ++i) {
    if (theta(i) != 0.0) k.noalias() += theta(i) * sys.element_k[static_cast<size_t>(i)];
  }
  return k;
}

AssembledSystem rebase(const AssembledSystem& sys, const ParameterVector& theta) {
  check_parameters(sys, theta);
  AssembledSystem out;
  out.mass = sys.mass;
  out.free_dofs = sys.free_dofs;
  out.k0 = Matrix::Zero(sys.n_dof(), sys.n_dof());
  out.element_k.reserve(sys.element_k.size());
  for (Index i = 0; i < sys.n_ele(); ++i) {
    out.element_k.push_back((1.0 + theta(i)) * sys.element_k[static_cast<size_t>(i)]);
    out.k0 += out.element_k.back();
  }
  return out;
}

ModalBasis solve_modal_basis(const Matrix& k, const Matrix& m) {
  if (k.rows() != k.cols() || m.rows() != m.cols() || k.rows() != m.rows() || k.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "stiffness and mass must be square and of equal size");
  }
  if (!k.allFinite() || !m.allFinite()) {
    throw Error(ErrorCode::NonFinite, "stiffness or mass has non-finite entries");
  }
  // Cholesky of M, then the symmetric standard problem L^-1 K L^-T.
  Eigen::LLT<Matrix> chol(m);
  if (chol.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenSolver, "mass matrix is not positive definite");
  }
  const auto l = chol.matrixL();
  Matrix c = l.solve(l.solve(k).transpose());
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenSolver, "symmetric eigenproblem did not converge");
  }

  ModalBasis basis;
  basis.eigenvalues = eig.eigenvalues();
  basis.shapes = chol.matrixU().solve(eig.eigenvectors());
  const Index n = basis.eigenvalues.size();
  for (Index j = 0; j < n; ++j) {
    // Re-normalize to phi' M phi = 1 against round-off in the back-transform.
    auto phi = basis.shapes.col(j);
    phi /= std::sqrt(phi.dot(m * phi));
    Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    if (phi(imax) < 0.0) phi = -phi;
  }
  for (Index j = 0; j + 1 < n; ++j) {
    const double a = basis.eigenvalues(j);
    const double b = basis.eigenvalues(j + 1);
    if (std::abs(b - a) < kRepeatedEigenvalueTol * std::abs(b)) basis.repeated_eigenvalues = true;
  }
  return basis;
}

ModalData restrict_modes(const ModalBasis& basis, Index n_modes,
                         const std::vector<Index>& sensor_dofs) {
  const Index n_dof = basis.shapes.rows();
  if (n_modes < 1 || n_modes > basis.n_modes()) {
    throw Error(ErrorCode::InvalidArgument, "requested " + std::to_string(n_modes) +
                                                " modes from a system with " +
                                                std::to_string(basis.n_modes()));
  }
  if (sensor_dofs.empty()) {
    throw Error(ErrorCode::InvalidArgument, "at least one sensor DOF is required");
  }
  for (Index d : sensor_dofs) {
    if (d < 0 || d >= n_dof) {
      throw Error(ErrorCode::InvalidArgument, "sensor DOF " + std::to_string(d) + " out of range");
    }
  }

  ModalData out;
  out.sensor_dofs = sensor_dofs;
  out.eigenvalues = basis.eigenvalues.head(n_modes);
  out.shapes.resize(static_cast<Index>(sensor_dofs.size()), n_modes);
  for (Index j = 0; j < n_modes; ++j) {
    for (size_t s = 0; s < sensor_dofs.size(); ++s) {
      out.shapes(static_cast<Index>(s), j) = basis.shapes(sensor_dofs[s], j);
    }
    Index imax = 0;
    out.shapes.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.shapes(imax, j) < 0.0) out.shapes.col(j) *= -1.0;
  }
  for (Index j = 0; j + 1 < n_modes; ++j) {
    const double a = out.eigenvalues(j);
    const double b = out.eigenvalues(j + 1);
    if (std::abs(b - a) < kRepeatedEigenvalueTol * std::abs(b)) out.repeated_eigenvalues = true;
  }
  if (!(out.eigenvalues.minCoeff() > 0.0)) {
    throw Error(ErrorCode::EigenSolver, "non-positive eigenvalue; stiffness is not positive definite");
  }
  return out;
}

ModalData solve_modes(const Matrix& k, const Matrix& m, Index n_modes,
                      const std::vector<Index>& sensor_dofs) {
  return restrict_modes(solve_modal_basis(k, m), n_modes, sensor_dofs);
}

std::vector<Index> all_dofs(Index n_dof) {
  std::vector<Index> dofs(static_cast<size_t>(n_dof));
  std::iota(dofs.begin(), dofs.end(), Index{0});
  return dofs;
}

}  // namespace sdid
