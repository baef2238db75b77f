#include "sdid/structural_model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sdid;

namespace {

ModelDefinition two_story(double k, double m) { return ModelDefinition::shear_building(2, k, m); }

// Two bars from pinned supports at (0,0) and (4,0) meeting at (x, y).
ModelDefinition two_bar(double x, double y) {
  ModelDefinition def;
  def.kind = ModelKind::PlanarTruss;
  def.elastic_modulus = 2.0e11;
  def.cross_section_area = 1.0e-3;
  def.density = 7850.0;
  def.nodes = {{0.0, 0.0}, {4.0, 0.0}, {x, y}};
  def.bars = {{0, 2}, {1, 2}};
  def.supports = {0, 1, 2, 3};
  return def;
}

}  // namespace

TEST(ShearBuilding, MatricesOfTwoStories) {
  const AssembledSystem sys = assemble(two_story(5.0, 3.0));
  Matrix k(2, 2);
  k << 10.0, -5.0, -5.0, 5.0;
  EXPECT_TRUE(sys.k0.isApprox(k));
  EXPECT_TRUE(sys.mass.isApprox(3.0 * Matrix::Identity(2, 2)));
  ASSERT_EQ(sys.n_ele(), 2);
  Matrix k1 = Matrix::Zero(2, 2);
  k1(0, 0) = 5.0;
  EXPECT_TRUE(sys.element_k[0].isApprox(k1));
  Matrix sum = sys.element_k[0] + sys.element_k[1];
  EXPECT_TRUE(sum.isApprox(sys.k0));
}

TEST(ShearBuilding, TwoStoryEigenvaluesMatchClosedForm) {
  // k/m (3 -+ sqrt 5) / 2 for equal stories; mass deliberately != 1.
  const double k = 7.0, m = 2.5;
  const AssembledSystem sys = assemble(two_story(k, m));
  const ModalBasis b = solve_modal_basis(sys.k0, sys.mass);
  EXPECT_NEAR(b.eigenvalues(0), k / m * (3.0 - std::sqrt(5.0)) / 2.0, 1e-12);
  EXPECT_NEAR(b.eigenvalues(1), k / m * (3.0 + std::sqrt(5.0)) / 2.0, 1e-12);
}

TEST(ShearBuilding, TenStoryBasisIsMassOrthonormal) {
  const AssembledSystem sys = assemble(ModelDefinition::shear_building(10, 176.729e6, 100e3));
  const ModalBasis b = solve_modal_basis(sys.k0, sys.mass);
  const Matrix gram = b.shapes.transpose() * sys.mass * b.shapes;
  EXPECT_LT((gram - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
  const Matrix kk = b.shapes.transpose() * sys.k0 * b.shapes;
  EXPECT_LT((kk - Matrix(b.eigenvalues.asDiagonal())).cwiseAbs().maxCoeff(),
            1e-9 * b.eigenvalues.maxCoeff());
  for (Index j = 0; j < 10; ++j) {
    Index imax = 0;
    b.shapes.col(j).cwiseAbs().maxCoeff(&imax);
    EXPECT_GT(b.shapes(imax, j), 0.0);
    if (j > 0) EXPECT_GT(b.eigenvalues(j), b.eigenvalues(j - 1));
  }
}

TEST(PlanarTruss, TwoBarStiffnessAndLumpedMass) {
  // Apex stiffness sum_b EA/L_b [c^2 cs; cs s^2], independent of the assembler.
  const double x = 1.3, y = 2.1;
  const AssembledSystem sys = assemble(two_bar(x, y));
  ASSERT_EQ(sys.n_dof(), 2);
  Matrix k = Matrix::Zero(2, 2);
  double total_length = 0.0;
  for (double x0 : {0.0, 4.0}) {
    const double l = std::hypot(x - x0, y);
    const double c = (x - x0) / l, s = y / l;
    Matrix kb(2, 2);
    kb << c * c, c * s, c * s, s * s;
    k += 2.0e11 * 1.0e-3 / l * kb;
    total_length += l;
  }
  EXPECT_TRUE(sys.k0.isApprox(k, 1e-12));
  // Half of each bar's rho A L lands on the apex, in both directions.
  EXPECT_NEAR(sys.mass(0, 0), 0.5 * 7850.0 * 1.0e-3 * total_length, 1e-9);
  EXPECT_NEAR(sys.mass(1, 1), sys.mass(0, 0), 1e-12);
  EXPECT_EQ(sys.mass(0, 1), 0.0);
}

TEST(PlanarTruss, ReducedDofLookup) {
  const AssembledSystem sys = assemble(two_bar(2.0, 1.5));
  EXPECT_EQ(sys.reduced_dof(4), 0);
  EXPECT_EQ(sys.reduced_dof(5), 1);
  EXPECT_THROW(sys.reduced_dof(0), Error);
}

TEST(Parameters, ApplyIsLinearInTheta) {
  const AssembledSystem sys = assemble(ModelDefinition::shear_building(4, 3.0, 1.5));
  Vector a(4), b(4);
  a << 0.1, -0.2, 0.05, 0.0;
  b << -0.3, 0.1, 0.0, 0.2;
  const Matrix lhs = apply_parameters(sys, a + b) - sys.k0;
  const Matrix rhs = (apply_parameters(sys, a) - sys.k0) + (apply_parameters(sys, b) - sys.k0);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Parameters, RebaseComposesMultiplicatively) {
  const AssembledSystem sys = assemble(ModelDefinition::shear_building(3, 2.0, 1.0));
  Vector t1(3), t2(3);
  t1 << 0.1, -0.2, 0.3;
  t2 << -0.25, 0.0, 0.1;
  const AssembledSystem re = rebase(sys, t1);
  const Vector combined = ((1.0 + t1.array()) * (1.0 + t2.array()) - 1.0).matrix();
  EXPECT_LT((apply_parameters(re, t2) - apply_parameters(sys, combined)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Parameters, NonPhysicalStiffnessRejected) {
  const AssembledSystem sys = assemble(ModelDefinition::shear_building(3, 2.0, 1.0));
  Vector t = Vector::Zero(3);
  t(1) = -1.0;
  EXPECT_THROW(check_parameters(sys, t), Error);
  EXPECT_THROW(apply_parameters(sys, Vector::Zero(2)), Error);
}

TEST(Definition, InvalidInputsRejected) {
  ModelDefinition def = ModelDefinition::shear_building(3, 2.0, 1.0);
  def.story_mass[1] = 0.0;
  EXPECT_THROW(assemble(def), Error);

  ModelDefinition truss = two_bar(2.0, 1.5);
  truss.supports = {0, 1, 2};
  EXPECT_THROW(assemble(truss), Error);  // rigid-body mode left
}

TEST(Modes, RestrictionPicksSensorRows) {
  const AssembledSystem sys = assemble(ModelDefinition::shear_building(5, 4.0, 2.0));
  const ModalBasis b = solve_modal_basis(sys.k0, sys.mass);
  const ModalData d = solve_modes(sys.k0, sys.mass, 2, {0, 3});
  ASSERT_EQ(d.shapes.rows(), 2);
  ASSERT_EQ(d.shapes.cols(), 2);
  for (Index j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(d.eigenvalues(j), b.eigenvalues(j));
    EXPECT_DOUBLE_EQ(d.shapes(0, j), b.shapes(0, j));
    EXPECT_DOUBLE_EQ(d.shapes(1, j), b.shapes(3, j));
  }
  EXPECT_THROW(solve_modes(sys.k0, sys.mass, 6, {0}), Error);
  EXPECT_THROW(solve_modes(sys.k0, sys.mass, 2, {7}), Error);
}
