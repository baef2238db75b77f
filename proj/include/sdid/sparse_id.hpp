#pragma once

#include "sdid/sensitivity.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace sdid {

// ---------------------------------------------------------------------------
// Closed-form kernels.

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar t) {
  using std::abs;
  return abs(z) <= t ? Scalar(0) : (z > Scalar(0) ? z - t : z + t);
}

template <typename Derived>
Index count_nonzero(const Eigen::MatrixBase<Derived>& x) {
  return (x.array() != typename Derived::Scalar(0)).count();
}

/// |r - S x|_2^2 + eta |x|_1
template <typename DR, typename DS, typename DX>
typename DR::Scalar lasso_objective(const Eigen::MatrixBase<DR>& r, const Eigen::MatrixBase<DS>& S,
                                    const Eigen::MatrixBase<DX>& x, typename DR::Scalar eta) {
  return (r - S * x).squaredNorm() + eta * x.template lpNorm<1>();
}

/// |r - S x|_2 + penalty * |x|_0 where penalty = delta * cond(S).
template <typename DR, typename DS, typename DX>
typename DR::Scalar stls_loss_with_penalty(const Eigen::MatrixBase<DR>& r,
                                           const Eigen::MatrixBase<DS>& S,
                                           const Eigen::MatrixBase<DX>& x,
                                           typename DR::Scalar penalty) {
  return (r - S * x).norm() + penalty * static_cast<typename DR::Scalar>(count_nonzero(x));
}

// ---------------------------------------------------------------------------

inline constexpr double kDefaultLossDelta = 0.001;

/// Ratio of the extreme singular values; infinite for rank-deficient S.
double condition_number(const Matrix& S);

/// |r - S x|_2 + delta * cond(S) * |x|_0
double stls_loss(const Vector& r, const Matrix& S, const Vector& x,
                 double delta = kDefaultLossDelta);

/// Minimum-norm least squares, discarding singular values below rel_tol * s_max.
/// `rank_deficient` (optional) reports whether any were discarded.
Vector min_norm_lstsq(const Matrix& S, const Vector& r, double rel_tol = 1e-10,
                      bool* rank_deficient = nullptr);

struct LassoOptions {
  double tol = 1e-8;
  Index max_sweeps = 10000;
};

/// Cyclic coordinate descent on |r - S x|^2 + eta |x|_1. eta = 0 returns the
/// minimum-norm least-squares solution.
Vector lasso(const Vector& r, const Matrix& S, double eta, const Vector* warm_start = nullptr,
             const LassoOptions& opts = {});

/// Largest violation of the LASSO optimality (subgradient) conditions.
double lasso_kkt_residual(const Vector& r, const Matrix& S, const Vector& x, double eta);

/// 2 |S' r|_inf: the smallest eta at which the LASSO solution is all-zero.
double max_eta(const Vector& r, const Matrix& S);

/// `n` values geometrically spaced from ratio * top up to top, ascending.
std::vector<double> geometric_grid(double top, Index n, double ratio);

struct LassoConfig {
  Index n_etas = 100;
  double eta_ratio = 1e-4;
  Index n_folds = 5;
  /// 1-based rank of the averaged held-out loss used to pick eta.
  Index selection_rank = 2;
};

void validate(const LassoConfig& cfg);

struct CvSelection {
  double eta = 0.0;
  Index eta_index = -1;
  /// Average of the fold models at the chosen eta.
  Vector coefficients;
  std::vector<double> grid;
  std::vector<double> cv_loss;
  Index n_folds = 0;
};

enum class Penalty { L1, L2 };

/// Random row-wise n-fold cross validation over the geometric eta grid.
CvSelection select_eta_cv(const Vector& r, const Matrix& S, const LassoConfig& cfg,
                          std::uint64_t seed, Penalty penalty = Penalty::L1);

/// Solves (S'S + eta I) x = S' r.
Vector ridge(const Vector& r, const Matrix& S, double eta);

/// Ridge with eta chosen by the same CV machinery at selection rank 1.
CvSelection ridge_cv(const Vector& r, const Matrix& S, const LassoConfig& cfg, std::uint64_t seed);

struct SparseSolution {
  Vector delta_theta;
  double loss = 0.0;
  double lambda = 0.0;
  std::vector<Index> support;
  /// Accepted thresholding/refit rounds.
  Index n_stls_iters = 0;
  /// No refit improved on the initial estimate, which is returned unchanged.
  bool guard = false;
  /// Every entry of the initial estimate fell below lambda.
  bool empty_threshold = false;
  /// A refit support had a rank-deficient column block.
  bool rank_deficient = false;
  /// Loss of the initial estimate followed by each accepted iterate.
  std::vector<double> loss_history;
};

/// Thresholding-independent data of one sensitivity iteration: the CV-LASSO
/// initial estimate and the l0 penalty weight delta * cond(S).
struct StlsProblem {
  Vector residue;
  Matrix jacobian;
  Vector initial;
  double penalty = 0.0;
  double eta = 0.0;
};

StlsProblem prepare_stls(const Vector& r, const Matrix& S, const LassoConfig& cfg,
                         std::uint64_t seed, double delta = kDefaultLossDelta);

inline constexpr Index kMaxStlsIters = 10;

/// Sequential thresholded least squares from the prepared initial estimate.
SparseSolution stls(const StlsProblem& problem, double lambda);

SparseSolution stls(const Vector& r, const Matrix& S, double lambda, const LassoConfig& cfg,
                    std::uint64_t seed, double delta = kDefaultLossDelta);

std::vector<Index> support_of(const Vector& x);

}  // namespace sdid
