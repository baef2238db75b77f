#include "sdid/sparse_id.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sdid;

namespace {

struct Instance {
  Vector r;
  Matrix S;
  Vector truth;
};

Instance sparse_instance(Index rows, Index cols, Index k, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Instance in;
  in.S.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) in.S(i, j) = n(rng);
  in.truth = Vector::Zero(cols);
  for (Index i = 0; i < k; ++i) in.truth(2 * i + 1) = -0.2 - 0.1 * static_cast<double>(i);
  in.r = in.S * in.truth;
  for (Index i = 0; i < rows; ++i) in.r(i) += noise * n(rng);
  return in;
}

}  // namespace

TEST(Kernels, SoftThreshold) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-1.0, 1.0), 0.0);
  EXPECT_FLOAT_EQ(soft_threshold(3.0f, 0.5f), 2.5f);
}

TEST(Kernels, LossCountsNonzeros) {
  Matrix S = Matrix::Identity(3, 3);
  Vector r(3), x(3);
  r << 1.0, 2.0, 2.0;
  x << 1.0, 0.0, 0.0;
  // |r - x| = 2*sqrt2, cond(I) = 1.
  EXPECT_NEAR(stls_loss(r, S, x, 0.5), std::sqrt(8.0) + 0.5, 1e-14);
  EXPECT_EQ(count_nonzero(x), 1);
}

TEST(Kernels, ConditionNumber) {
  Matrix S = Matrix::Zero(3, 2);
  S(0, 0) = 4.0;
  S(1, 1) = 0.5;
  EXPECT_NEAR(condition_number(S), 8.0, 1e-12);
  S(1, 1) = 0.0;
  EXPECT_TRUE(std::isinf(condition_number(S)));
}

TEST(Lasso, OrthonormalDesignIsSoftThresholding) {
  // With S'S = I the minimizer of |r - Sx|^2 + eta|x|_1 is soft(S'r, eta/2).
  Eigen::HouseholderQR<Matrix> qr(Matrix::Random(8, 4));
  const Matrix q = qr.householderQ() * Matrix::Identity(8, 4);
  Vector r = Vector::LinSpaced(8, -1.0, 1.0);
  const double eta = 0.3;
  const Vector x = lasso(r, q, eta);
  const Vector z = q.transpose() * r;
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(x(i), soft_threshold(z(i), eta / 2), 1e-7);
}

TEST(Lasso, SatisfiesKktAndVanishesAtMaxEta) {
  const Instance in = sparse_instance(30, 10, 3, 0.05, 7);
  for (double eta : {0.01, 0.5, 3.0}) {
    const Vector x = lasso(in.r, in.S, eta);
    EXPECT_LT(lasso_kkt_residual(in.r, in.S, x, eta), 1e-5) << eta;
  }
  const double top = max_eta(in.r, in.S);
  EXPECT_EQ(count_nonzero(lasso(in.r, in.S, top * 1.0001)), 0);
  EXPECT_GT(count_nonzero(lasso(in.r, in.S, top * 0.9)), 0);
}

TEST(Lasso, GeometricGrid) {
  const auto g = geometric_grid(10.0, 5, 1e-4);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_NEAR(g.front(), 1e-3, 1e-15);
  EXPECT_DOUBLE_EQ(g.back(), 10.0);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], 10.0, 1e-9);
}

TEST(Ridge, SolvesRegularizedNormalEquations) {
  const Instance in = sparse_instance(12, 5, 2, 0.1, 3);
  const double eta = 0.7;
  const Vector x = ridge(in.r, in.S, eta);
  const Vector grad = in.S.transpose() * (in.S * x - in.r) + eta * x;
  EXPECT_LT(grad.norm(), 1e-10);
  EXPECT_THROW(ridge(in.r, in.S, 0.0), Error);
}

TEST(CrossValidation, DeterministicAndOnGrid) {
  const Instance in = sparse_instance(40, 8, 2, 0.02, 11);
  const CvSelection a = select_eta_cv(in.r, in.S, {}, 5);
  const CvSelection b = select_eta_cv(in.r, in.S, {}, 5);
  EXPECT_EQ(a.eta, b.eta);
  EXPECT_EQ(a.coefficients, b.coefficients);
  ASSERT_GE(a.eta_index, 0);
  EXPECT_EQ(a.grid[static_cast<size_t>(a.eta_index)], a.eta);
  EXPECT_EQ(a.grid.size(), 100u);
}

TEST(Stls, RecoversSparseSupport) {
  const Instance in = sparse_instance(40, 10, 3, 1e-3, 2);
  const SparseSolution s = stls(in.r, in.S, 0.1, {}, 1);
  EXPECT_EQ(s.support, (std::vector<Index>{1, 3, 5}));
  EXPECT_LT((s.delta_theta - in.truth).cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_FALSE(s.guard);
}

TEST(Stls, AcceptedLossesStrictlyDecrease) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = sparse_instance(25, 9, 2, 0.05, seed);
    const SparseSolution s = stls(in.r, in.S, 0.05, {}, seed);
    for (size_t k = 1; k < s.loss_history.size(); ++k) {
      EXPECT_LT(s.loss_history[k], s.loss_history[k - 1]);
    }
    EXPECT_EQ(s.loss, s.loss_history.back());
  }
}

TEST(Stls, HardThresholdIsIdempotent) {
  const Instance in = sparse_instance(30, 8, 2, 1e-3, 4);
  StlsProblem p = prepare_stls(in.r, in.S, {}, 4);
  const SparseSolution first = stls(p, 0.1);
  p.initial = first.delta_theta;
  const SparseSolution second = stls(p, 0.1);
  EXPECT_LT((second.delta_theta - first.delta_theta).norm(), 1e-12);
  EXPECT_EQ(second.support, first.support);
}

TEST(Stls, GuardReturnsInitialEstimate) {
  // A threshold above every coefficient leaves nothing to refit.
  const Instance in = sparse_instance(30, 8, 2, 1e-3, 4);
  const StlsProblem p = prepare_stls(in.r, in.S, {}, 4);
  const SparseSolution s = stls(p, 10.0);
  EXPECT_TRUE(s.guard);
  EXPECT_TRUE(s.empty_threshold);
  EXPECT_EQ(s.delta_theta, p.initial);
  EXPECT_THROW(stls(p, 0.0), Error);
}

TEST(Stls, MinNormLeastSquaresHandlesRankDeficiency) {
  Matrix S(3, 2);
  S << 1, 1, 1, 1, 1, 1;
  Vector r = Vector::Constant(3, 2.0);
  bool deficient = false;
  const Vector x = min_norm_lstsq(S, r, 1e-10, &deficient);
  EXPECT_TRUE(deficient);
  EXPECT_NEAR(x(0), 1.0, 1e-12);
  EXPECT_NEAR(x(1), 1.0, 1e-12);
}
