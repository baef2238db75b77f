#include "sdid/sparse_id.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace sdid {

namespace {

void check_system(const Vector& r, const Matrix& S) {
  if (S.rows() != r.size()) {
    throw Error(ErrorCode::InvalidArgument, "residue has " + std::to_string(r.size()) +
                                                " rows, Jacobian " + std::to_string(S.rows()));
  }
  if (!r.allFinite() || !S.allFinite()) {
    throw Error(ErrorCode::NonFinite, "residue or Jacobian has non-finite entries");
  }
}

Matrix select_rows(const Matrix& S, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), S.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = S.row(rows[i]);
  return out;
}

Vector select_rows(const Vector& r, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = r(rows[i]);
  return out;
}

}  // namespace

double condition_number(const Matrix& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Matrix> svd(S);
  const Vector& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (S.rows() < S.cols() || !(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

double stls_loss(const Vector& r, const Matrix& S, const Vector& x, double delta) {
  check_system(r, S);
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "coefficients are not finite");
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  return stls_loss_with_penalty(r, S, x, delta * condition_number(S));
}

Vector min_norm_lstsq(const Matrix& S, const Vector& r, double rel_tol, bool* rank_deficient) {
  if (S.cols() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = rel_tol * (sv.size() ? sv(0) : 0.0);
  Vector coeff = svd.matrixU().transpose() * r;
  bool deficient = sv.size() < S.cols();
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut && sv(i) > 0.0) {
      coeff(i) /= sv(i);
    } else {
      coeff(i) = 0.0;
      deficient = true;
    }
  }
  if (rank_deficient) *rank_deficient = deficient;
  return svd.matrixV() * coeff;
}

Vector lasso(const Vector& r, const Matrix& S, double eta, const Vector* warm_start,
             const LassoOptions& opts) {
  check_system(r, S);
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::InvalidArgument, "eta must be finite and non-negative");
  }
  if (eta == 0.0) return min_norm_lstsq(S, r);

  const Index p = S.cols();
  Vector x = (warm_start && warm_start->size() == p) ? *warm_start : Vector::Zero(p);
  const Vector col_sq = S.colwise().squaredNorm().transpose();
  Vector resid = r - S * x;
  const double half_eta = 0.5 * eta;

  for (Index sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) {
        x(j) = 0.0;
        continue;
      }
      const double old = x(j);
      const double z = S.col(j).dot(resid) + col_sq(j) * old;
      const double updated = soft_threshold(z, half_eta) / col_sq(j);
      if (updated != old) {
        resid.noalias() -= (updated - old) * S.col(j);
        x(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change < opts.tol) break;
  }
  return x;
}

double lasso_kkt_residual(const Vector& r, const Matrix& S, const Vector& x, double eta) {
  const Vector grad = 2.0 * S.transpose() * (r - S * x);
  double worst = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double v = x(j) != 0.0 ? std::abs(grad(j) - eta * (x(j) > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(grad(j)) - eta);
    worst = std::max(worst, v);
  }
  return worst;
}

double max_eta(const Vector& r, const Matrix& S) {
  check_system(r, S);
  if (S.size() == 0 || S.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::UndefinedGrid, "Jacobian is zero; the eta grid is undefined");
  }
  return 2.0 * (S.transpose() * r).cwiseAbs().maxCoeff();
}

std::vector<double> geometric_grid(double top, Index n, double ratio) {
  if (n < 2 || !(ratio > 0.0 && ratio < 1.0) || !(top > 0.0)) {
    throw Error(ErrorCode::UndefinedGrid, "grid needs n >= 2, 0 < ratio < 1 and top > 0");
  }
  std::vector<double> grid(static_cast<size_t>(n));
  const double lo = std::log(top * ratio);
  const double hi = std::log(top);
  for (Index i = 0; i < n; ++i) {
    grid[static_cast<size_t>(i)] =
        std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  grid.back() = top;
  return grid;
}

void validate(const LassoConfig& cfg) {
  if (cfg.n_etas < 2 || !(cfg.eta_ratio > 0.0 && cfg.eta_ratio < 1.0) || cfg.n_folds < 2 ||
      cfg.selection_rank < 1 || cfg.selection_rank > cfg.n_etas) {
    throw Error(ErrorCode::InvalidArgument, "invalid LASSO configuration");
  }
}

Vector ridge(const Vector& r, const Matrix& S, double eta) {
  check_system(r, S);
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge eta must be positive");
  Matrix a = S.transpose() * S;
  a.diagonal().array() += eta;
  return a.llt().solve(S.transpose() * r);
}

CvSelection select_eta_cv(const Vector& r, const Matrix& S, const LassoConfig& cfg,
                          std::uint64_t seed, Penalty penalty) {
  validate(cfg);
  check_system(r, S);
  const Index rows = S.rows();
  if (rows < 2) throw Error(ErrorCode::InvalidArgument, "cross validation needs at least two rows");

  CvSelection out;
  const double top = max_eta(r, S);
  if (top == 0.0) {
    // S' r = 0: the zero vector is optimal for every eta.
    out.coefficients = Vector::Zero(S.cols());
    return out;
  }
  out.grid = geometric_grid(top, cfg.n_etas, cfg.eta_ratio);
  out.n_folds = std::min(cfg.n_folds, rows);

  std::vector<Index> perm(static_cast<size_t>(rows));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_eta = static_cast<size_t>(cfg.n_etas);
  std::vector<std::vector<Vector>> models(static_cast<size_t>(out.n_folds));
  out.cv_loss.assign(n_eta, 0.0);

  for (Index f = 0; f < out.n_folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < rows; ++i) {
      (i % out.n_folds == f ? test : train).push_back(perm[static_cast<size_t>(i)]);
    }
    const Matrix s_train = select_rows(S, train);
    const Vector r_train = select_rows(r, train);
    const Matrix s_test = select_rows(S, test);
    const Vector r_test = select_rows(r, test);

    auto& fold_models = models[static_cast<size_t>(f)];
    fold_models.resize(n_eta);
    if (penalty == Penalty::L1) {
      // Warm-started path from the largest eta down.
      Vector x = Vector::Zero(S.cols());
      for (size_t e = n_eta; e-- > 0;) {
        x = lasso(r_train, s_train, out.grid[e], &x);
        fold_models[e] = x;
      }
    } else {
      for (size_t e = 0; e < n_eta; ++e) fold_models[e] = ridge(r_train, s_train, out.grid[e]);
    }
    for (size_t e = 0; e < n_eta; ++e) {
      out.cv_loss[e] += (r_test - s_test * fold_models[e]).squaredNorm() /
                        static_cast<double>(test.size()) / static_cast<double>(out.n_folds);
    }
  }

  // Rank by averaged loss; ties go to the larger (more regularizing) eta.
  std::vector<size_t> order(n_eta);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (out.cv_loss[a] != out.cv_loss[b]) return out.cv_loss[a] < out.cv_loss[b];
    return a > b;
  });
  const size_t chosen = order[static_cast<size_t>(cfg.selection_rank - 1)];
  out.eta_index = static_cast<Index>(chosen);
  out.eta = out.grid[chosen];
  out.coefficients = Vector::Zero(S.cols());
  for (const auto& fm : models) out.coefficients += fm[chosen];
  out.coefficients /= static_cast<double>(out.n_folds);
  return out;
}

CvSelection ridge_cv(const Vector& r, const Matrix& S, const LassoConfig& cfg, std::uint64_t seed) {
  LassoConfig c = cfg;
  c.selection_rank = 1;
  CvSelection sel = select_eta_cv(r, S, c, seed, Penalty::L2);
  if (sel.eta > 0.0) sel.coefficients = ridge(r, S, sel.eta);
  return sel;
}

std::vector<Index> support_of(const Vector& x) {
  std::vector<Index> s;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0.0) s.push_back(i);
  }
  return s;
}

StlsProblem prepare_stls(const Vector& r, const Matrix& S, const LassoConfig& cfg,
                         std::uint64_t seed, double delta) {
  check_system(r, S);
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  StlsProblem p;
  p.residue = r;
  p.jacobian = S;
  const CvSelection sel = select_eta_cv(r, S, cfg, seed);
  p.initial = sel.coefficients;
  p.eta = sel.eta;
  p.penalty = delta * condition_number(S);
  return p;
}

SparseSolution stls(const StlsProblem& problem, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  const Vector& r = problem.residue;
  const Matrix& S = problem.jacobian;
  const Index p = S.cols();

  SparseSolution sol;
  sol.lambda = lambda;
  sol.delta_theta = problem.initial;
  sol.loss = stls_loss_with_penalty(r, S, problem.initial, problem.penalty);
  sol.loss_history.push_back(sol.loss);

  Vector previous = problem.initial;
  for (Index j = 1; j <= kMaxStlsIters; ++j) {
    std::vector<Index> keep;
    for (Index i = 0; i < p; ++i) {
      if (std::abs(previous(i)) >= lambda) keep.push_back(i);
    }
    if (keep.empty()) {
      if (j == 1) sol.empty_threshold = true;
      break;
    }
    Matrix sb(S.rows(), static_cast<Index>(keep.size()));
    for (size_t c = 0; c < keep.size(); ++c) sb.col(static_cast<Index>(c)) = S.col(keep[c]);
    bool deficient = false;
    const Vector xb = min_norm_lstsq(sb, r, 1e-10, &deficient);

    Vector x = Vector::Zero(p);
    for (size_t c = 0; c < keep.size(); ++c) x(keep[c]) = xb(static_cast<Index>(c));
    const double loss = stls_loss_with_penalty(r, S, x, problem.penalty);
    if (loss < sol.loss && count_nonzero(x) != 0) {
      sol.loss = loss;
      sol.delta_theta = x;
      sol.n_stls_iters = j;
      sol.rank_deficient = sol.rank_deficient || deficient;
      sol.loss_history.push_back(loss);
      previous = std::move(x);
    } else {
      break;
    }
  }
  sol.guard = sol.n_stls_iters == 0;
  sol.support = support_of(sol.delta_theta);
  return sol;
}

SparseSolution stls(const Vector& r, const Matrix& S, double lambda, const LassoConfig& cfg,
                    std::uint64_t seed, double delta) {
  return stls(prepare_stls(r, S, cfg, seed, delta), lambda);
}

}  // namespace sdid
