#include "sdid/bayes_update.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>

namespace sdid {

void validate(const HyperPriors& hp) {
  if (!(hp.a0 > 0.0) || !(hp.b0 > 0.0) || !(hp.a1 > 0.0) || !(hp.b1 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "hyperpriors a0, b0, a1, b1 must be strictly positive");
  }
}

namespace {

struct NormalEquations {
  Matrix gram;   // sum_n S_n' S_n
  Vector rhs;    // sum_n S_n' r_n
  Index rows = 0;
  Index n_ele = 0;
};

NormalEquations reduce(std::span<const SensitivitySystem> systems) {
  if (systems.empty()) throw Error(ErrorCode::InvalidArgument, "no observations");
  NormalEquations ne;
  ne.n_ele = systems.front().n_ele();
  ne.gram = Matrix::Zero(ne.n_ele, ne.n_ele);
  ne.rhs = Vector::Zero(ne.n_ele);
  for (const auto& s : systems) {
    if (s.n_ele() != ne.n_ele) {
      throw Error(ErrorCode::InvalidArgument, "observations disagree on the number of elements");
    }
    ne.gram.selfadjointView<Eigen::Lower>().rankUpdate(s.jacobian.transpose());
    ne.rhs.noalias() += s.jacobian.transpose() * s.residue;
    ne.rows += s.rows();
  }
  ne.gram = ne.gram.selfadjointView<Eigen::Lower>();
  return ne;
}

double misfit(std::span<const SensitivitySystem> systems, const Vector& dtheta) {
  double q = 0.0;
  for (const auto& s : systems) q += (s.jacobian * dtheta - s.residue).squaredNorm();
  return q;
}

double sigma2_denominator(Index rows, const HyperPriors& hp) {
  return static_cast<double>(rows) + 2.0 * (hp.a0 + 1.0);
}

double alpha_denominator(Index n_ele, const HyperPriors& hp) {
  return static_cast<double>(n_ele) / 2.0 + (hp.a1 + 1.0);
}

bool small_change(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

bool small_change(const Vector& a, const Vector& b, double tol) {
  const double scale = std::max(a.norm(), b.norm());
  return (a - b).norm() <= tol * scale || scale == 0.0;
}

}  // namespace

MapIterate initial_iterate(std::span<const SensitivitySystem> systems, const HyperPriors& hp) {
  if (systems.empty()) throw Error(ErrorCode::InvalidArgument, "no observations");
  const auto [r, S] = stack(systems);
  MapIterate it;
  it.delta_theta = Vector::Zero(S.cols());
  it.alpha = 1.0;
  const double mean = r.mean();
  double var = r.size() > 1 ? (r.array() - mean).square().sum() / static_cast<double>(r.size() - 1)
                            : 0.0;
  if (!(var > 0.0)) var = 2.0 * hp.b0 / sigma2_denominator(r.size(), hp);
  it.sigma2 = var;
  return it;
}

double map_objective(std::span<const SensitivitySystem> systems, const HyperPriors& hp,
                     const Vector& delta_theta, double sigma2, double alpha) {
  Index rows = 0;
  for (const auto& s : systems) rows += s.rows();
  const double m = sigma2_denominator(rows, hp);
  const double c = alpha_denominator(delta_theta.size(), hp);
  const double q = misfit(systems, delta_theta);
  return 0.5 * m * std::log(sigma2) + (q + 2.0 * hp.b0) / (2.0 * sigma2) +
         0.5 * c * std::log(alpha) + (delta_theta.squaredNorm() + 2.0 * hp.b1) / (2.0 * alpha);
}

MapIterate map_fixed_point(std::span<const SensitivitySystem> systems, const HyperPriors& hp,
                           const MapIterate& init, double tol, Index max_iter,
                           FixedPointTrace* trace) {
  validate(hp);
  const NormalEquations ne = reduce(systems);
  if (init.delta_theta.size() != ne.n_ele) {
    throw Error(ErrorCode::InvalidArgument, "initial iterate has the wrong length");
  }
  if (!(init.sigma2 > 0.0) || !(init.alpha > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial sigma^2 and alpha must be positive");
  }
  const double m = sigma2_denominator(ne.rows, hp);
  const double c = alpha_denominator(ne.n_ele, hp);

  MapIterate it = init;
  it.converged = false;
  it.n_inner_iters = 0;
  if (trace) trace->objective.clear();

  for (Index k = 1; k <= max_iter; ++k) {
    Matrix a = ne.gram;
    a.diagonal().array() += it.sigma2 / it.alpha;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::Divergence, "regularized normal matrix is not positive definite");
    }
    const Vector dtheta = llt.solve(ne.rhs);
    const double sigma2 = (misfit(systems, dtheta) + 2.0 * hp.b0) / m;
    const double alpha = (dtheta.squaredNorm() + 2.0 * hp.b1) / c;

    if (!dtheta.allFinite() || !std::isfinite(sigma2) || !std::isfinite(alpha) ||
        !(sigma2 > 0.0) || !(alpha > 0.0)) {
      throw Error(ErrorCode::Divergence,
                  "MAP fixed point produced a non-finite iterate at cycle " + std::to_string(k));
    }

    const bool done = small_change(dtheta, it.delta_theta, tol) &&
                      small_change(sigma2, it.sigma2, tol) && small_change(alpha, it.alpha, tol);
    it.delta_theta = dtheta;
    it.sigma2 = sigma2;
    it.alpha = alpha;
    it.n_inner_iters = k;
    if (trace) trace->objective.push_back(map_objective(systems, hp, dtheta, sigma2, alpha));
    if (done) {
      it.converged = true;
      break;
    }
  }
  return it;
}

Matrix posterior_hessian(std::span<const SensitivitySystem> systems, const MapIterate& iterate) {
  const NormalEquations ne = reduce(systems);
  Matrix h = ne.gram / iterate.sigma2;
  h.diagonal().array() += 1.0 / iterate.alpha;
  return h;
}

Matrix posterior_covariance(std::span<const SensitivitySystem> systems, const MapIterate& iterate) {
  if (!(iterate.sigma2 > 0.0) || !(iterate.alpha > 0.0)) {
    throw Error(ErrorCode::Covariance, "sigma^2 and alpha must be positive");
  }
  const Matrix h = posterior_hessian(systems, iterate);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::Covariance, "posterior Hessian is numerically singular");
  }
  Matrix cov = static_cast<double>(systems.size()) *
               llt.solve(Matrix::Identity(h.rows(), h.cols()));
  return 0.5 * (cov + cov.transpose());
}

std::vector<GaussianFit> marginal_posteriors(const Vector& theta_hat, const Matrix& covariance,
                                             Index n_samples, std::uint64_t seed) {
  const Index n = theta_hat.size();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "covariance size does not match the mean");
  }
  if (n_samples < 1000) {
    throw Error(ErrorCode::InvalidArgument, "at least 1000 samples are required");
  }
  if (!covariance.isApprox(covariance.transpose(), 1e-10)) {
    throw Error(ErrorCode::NotPositiveSemiDefinite, "covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  Vector d = eig.eigenvalues();
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  if (d.minCoeff() < -1e-10 * scale) {
    throw Error(ErrorCode::NotPositiveSemiDefinite,
                "covariance has eigenvalue " + std::to_string(d.minCoeff()));
  }
  const Matrix factor = eig.eigenvectors() * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector sum = Vector::Zero(n);
  Vector sum_sq = Vector::Zero(n);
  Vector z(n);
  for (Index s = 0; s < n_samples; ++s) {
    for (Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Vector x = theta_hat + factor * z;
    sum += x;
    sum_sq += x.cwiseAbs2();
  }
  const double ns = static_cast<double>(n_samples);
  std::vector<GaussianFit> out(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double mean = sum(i) / ns;
    const double var = std::max(0.0, (sum_sq(i) - ns * mean * mean) / (ns - 1.0));
    out[static_cast<size_t>(i)] = {mean, std::sqrt(var)};
  }
  return out;
}

PosteriorEstimate run_model_update(const AssembledSystem& sys,
                                   std::span<const ModalData> measured_sets,
                                   const UpdateOptions& opts) {
  if (measured_sets.empty()) {
    throw Error(ErrorCode::InvalidArgument, "at least one measurement set is required");
  }
  validate(opts.hyper);

  PosteriorEstimate est;
  est.theta_hat = Vector::Zero(sys.n_ele());
  est.covariance = Matrix::Zero(sys.n_ele(), sys.n_ele());

  std::vector<SensitivitySystem> systems(measured_sets.size());
  for (Index k = 1; k <= opts.outer_max; ++k) {
    for (size_t n = 0; n < measured_sets.size(); ++n) {
      systems[n] = assemble_sensitivity(sys, est.theta_hat, measured_sets[n], opts.weights);
    }
    const MapIterate it = map_fixed_point(systems, opts.hyper, initial_iterate(systems, opts.hyper),
                                          opts.inner_tol, opts.inner_max);
    Vector step = it.delta_theta;
    // Keep every element stiffness positive.
    while (((est.theta_hat + step).array() <= -0.95).any()) step *= 0.5;

    est.theta_hat += step;
    est.covariance += posterior_covariance(systems, it);

    UpdateRecord rec;
    rec.delta_theta = step;
    rec.sigma2 = it.sigma2;
    rec.alpha = it.alpha;
    rec.inner_iters = it.n_inner_iters;
    rec.relative_increment = step.norm() / std::max(est.theta_hat.norm(), 1.0);
    rec.residue_norm = stack(systems).first.norm();
    est.history.push_back(std::move(rec));

    if (est.history.back().relative_increment < opts.outer_tol) {
      est.converged = true;
      break;
    }
  }
  est.per_param = marginal_posteriors(est.theta_hat, est.covariance, opts.n_samples, opts.seed);
  return est;
}

}  // namespace sdid
