#include "sdid/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace sdid {

SensitivityWeights default_weights(const AssembledSystem& sys) {
  SensitivityWeights w;
  w.beta_lambda = kDefaultResidueScale;
  w.beta_phi = kDefaultResidueScale * std::sqrt(sys.mass.diagonal().mean());
  return w;
}

double eigenvalue_derivative(const AssembledSystem& sys, const Eigen::Ref<const Vector>& phi,
                             Index element) {
  if (phi.size() != sys.n_dof()) {
    throw Error(ErrorCode::InvalidArgument, "shape length " + std::to_string(phi.size()) +
                                                " != n_dof " + std::to_string(sys.n_dof()));
  }
  if (element < 0 || element >= sys.n_ele()) {
    throw Error(ErrorCode::InvalidArgument, "element index out of range");
  }
  return phi.dot(sys.element_k[static_cast<size_t>(element)] * phi);
}

namespace {

void check_simple(const Vector& eigenvalues, Index j) {
  const double lj = eigenvalues(j);
  for (Index r = 0; r < eigenvalues.size(); ++r) {
    if (r != j && std::abs(lj - eigenvalues(r)) < kRepeatedEigenvalueTol * std::abs(lj)) {
      throw Error(ErrorCode::DegenerateMode, "mode " + std::to_string(j + 1) +
                                                 " is repeated; shape derivative undefined");
    }
  }
}

// Superposition coefficients c_r = phi_r' K phi_j / (lambda_j - lambda_r), c_j = 0.
Vector superposition_coefficients(const Matrix& shapes, const Vector& eigenvalues,
                                  const Matrix& element_k, Index j) {
  Vector c = shapes.transpose() * (element_k * shapes.col(j));
  const double lj = eigenvalues(j);
  for (Index r = 0; r < c.size(); ++r) {
    c(r) = (r == j) ? 0.0 : c(r) / (lj - eigenvalues(r));
  }
  return c;
}

}  // namespace

Vector eigenvector_derivative(const AssembledSystem& sys, const ModalBasis& modes, Index j,
                              Index element) {
  if (modes.shapes.rows() != sys.n_dof() || modes.n_modes() != sys.n_dof()) {
    throw Error(ErrorCode::InvalidArgument, "eigenvector derivative needs the full modal basis");
  }
  if (j < 0 || j >= modes.n_modes() || element < 0 || element >= sys.n_ele()) {
    throw Error(ErrorCode::InvalidArgument, "mode or element index out of range");
  }
  check_simple(modes.eigenvalues, j);
  return modes.shapes *
         superposition_coefficients(modes.shapes, modes.eigenvalues,
                                    sys.element_k[static_cast<size_t>(element)], j);
}

double modal_assurance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double num = a.dot(b);
  const double den = a.squaredNorm() * b.squaredNorm();
  return den > 0.0 ? num * num / den : 0.0;
}

ModeMatch match_modes(const ModalData& measured, const ModalData& model) {
  if (measured.sensor_dofs != model.sensor_dofs) {
    throw Error(ErrorCode::InvalidArgument, "measured and model shapes use different sensor DOFs");
  }
  const Index n_meas = measured.n_modes();
  const Index n_model = model.n_modes();
  if (n_model < n_meas) {
    throw Error(ErrorCode::InvalidArgument, "model provides fewer modes than were measured");
  }

  struct Candidate {
    double mac;
    double gap;
    Index meas;
    Index model;
  };
  std::vector<Candidate> pairs;
  pairs.reserve(static_cast<size_t>(n_meas * n_model));
  for (Index a = 0; a < n_meas; ++a) {
    for (Index b = 0; b < n_model; ++b) {
      const double gap = std::abs(measured.eigenvalues(a) - model.eigenvalues(b)) /
                         std::abs(measured.eigenvalues(a));
      pairs.push_back({modal_assurance(measured.shapes.col(a), model.shapes.col(b)), gap, a, b});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(y.mac, x.gap) < std::tie(x.mac, y.gap);
  });

  ModeMatch match;
  match.model_index.assign(static_cast<size_t>(n_meas), -1);
  match.sign.assign(static_cast<size_t>(n_meas), 1.0);
  match.mac.assign(static_cast<size_t>(n_meas), 0.0);
  std::vector<bool> used(static_cast<size_t>(n_model), false);
  Index assigned = 0;
  for (const auto& p : pairs) {
    if (assigned == n_meas) break;
    auto& slot = match.model_index[static_cast<size_t>(p.meas)];
    if (slot >= 0 || used[static_cast<size_t>(p.model)]) continue;
    slot = p.model;
    used[static_cast<size_t>(p.model)] = true;
    match.mac[static_cast<size_t>(p.meas)] = p.mac;
    match.sign[static_cast<size_t>(p.meas)] =
        measured.shapes.col(p.meas).dot(model.shapes.col(p.model)) >= 0.0 ? 1.0 : -1.0;
    ++assigned;
  }
  for (Index a = 0; a < n_meas; ++a) {
    if (match.mac[static_cast<size_t>(a)] < kMinAcceptedMac) {
      throw Error(ErrorCode::MatchFailure,
                  "measured mode " + std::to_string(a + 1) + " has best MAC " +
                      std::to_string(match.mac[static_cast<size_t>(a)]) + " < 0.5");
    }
  }
  return match;
}

ModalData apply_match(const ModalData& model, const ModeMatch& match) {
  ModalData out;
  out.sensor_dofs = model.sensor_dofs;
  const auto n = static_cast<Index>(match.model_index.size());
  out.eigenvalues.resize(n);
  out.shapes.resize(model.shapes.rows(), n);
  for (Index a = 0; a < n; ++a) {
    const Index b = match.model_index[static_cast<size_t>(a)];
    out.eigenvalues(a) = model.eigenvalues(b);
    out.shapes.col(a) = match.sign[static_cast<size_t>(a)] * model.shapes.col(b);
  }
  out.repeated_eigenvalues = model.repeated_eigenvalues;
  return out;
}

SensitivitySystem assemble_sensitivity(const AssembledSystem& sys, const ParameterVector& theta,
                                       const ModalData& measured,
                                       const SensitivityWeights& weights) {
  if (!(weights.beta_lambda > 0.0) || !(weights.beta_phi > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "beta weights must be strictly positive");
  }
  const Index n_meas = measured.n_modes();
  const Index n_sen = measured.n_sensors();
  if (measured.shapes.rows() != n_sen || measured.shapes.cols() != n_meas) {
    throw Error(ErrorCode::InvalidArgument, "measured shape matrix does not match sensors x modes");
  }

  const ModalBasis basis = solve_modal_basis(apply_parameters(sys, theta), sys.mass);
  if (basis.n_modes() < n_meas) {
    throw Error(ErrorCode::InvalidArgument, "more measured modes than model DOFs");
  }
  const Index pool = std::min<Index>(basis.n_modes(), 2 * n_meas);
  const ModalData model = restrict_modes(basis, pool, measured.sensor_dofs);
  const ModeMatch match = match_modes(measured, model);

  Matrix sensor_shapes(n_sen, basis.n_modes());
  for (Index s = 0; s < n_sen; ++s) {
    sensor_shapes.row(s) = basis.shapes.row(measured.sensor_dofs[static_cast<size_t>(s)]);
  }

  const Index block = n_sen + 1;
  SensitivitySystem out;
  out.beta_lambda = weights.beta_lambda;
  out.beta_phi = weights.beta_phi;
  out.n_modes = n_meas;
  out.n_sensors = n_sen;
  out.residue.resize(n_meas * block);
  out.jacobian.resize(n_meas * block, sys.n_ele());

  for (Index a = 0; a < n_meas; ++a) {
    const Index j = match.model_index[static_cast<size_t>(a)];
    check_simple(basis.eigenvalues, j);
    const double lam = basis.eigenvalues(j);
    // Align the full shape with the sign the measured data uses.
    Index imax = 0;
    Vector phi_sensors = sensor_shapes.col(j);
    phi_sensors.cwiseAbs().maxCoeff(&imax);
    const double restrict_sign = phi_sensors(imax) < 0.0 ? -1.0 : 1.0;
    const double sign = restrict_sign * match.sign[static_cast<size_t>(a)];
    const Vector phi = sign * basis.shapes.col(j);

    const Index row = a * block;
    out.residue(row) = weights.beta_lambda * (measured.eigenvalues(a) - lam) / lam;
    out.residue.segment(row + 1, n_sen) =
        weights.beta_phi * (measured.shapes.col(a) - sign * sensor_shapes.col(j));

    for (Index i = 0; i < sys.n_ele(); ++i) {
      const Matrix& ke = sys.element_k[static_cast<size_t>(i)];
      out.jacobian(row, i) = weights.beta_lambda * phi.dot(ke * phi) / lam;
      const Vector c = superposition_coefficients(basis.shapes, basis.eigenvalues, ke, j);
      out.jacobian.block(row + 1, i, n_sen, 1) = weights.beta_phi * sign * (sensor_shapes * c);
    }
  }
  return out;
}

std::pair<Vector, Matrix> stack(std::span<const SensitivitySystem> systems) {
  if (systems.empty()) throw Error(ErrorCode::InvalidArgument, "no sensitivity systems to stack");
  Index rows = 0;
  const Index cols = systems.front().n_ele();
  for (const auto& s : systems) {
    if (s.n_ele() != cols) throw Error(ErrorCode::InvalidArgument, "systems disagree on n_ele");
    rows += s.rows();
  }
  Vector r(rows);
  Matrix S(rows, cols);
  Index at = 0;
  for (const auto& s : systems) {
    r.segment(at, s.rows()) = s.residue;
    S.middleRows(at, s.rows()) = s.jacobian;
    at += s.rows();
  }
  return {std::move(r), std::move(S)};
}

}  // namespace sdid
