#pragma once

#include "sdid/sparse_id.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace sdid {

/// Matern 5/2 covariance: s2 (1 + sqrt5 d/l + 5 d^2/(3 l^2)) exp(-sqrt5 d/l), d = |x - x'|.
template <typename Scalar>
Scalar matern52(Scalar x, Scalar x_prime, Scalar kernel_scale, Scalar length_scale) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  const Scalar u = sqrt(Scalar(5)) * abs(x - x_prime) / length_scale;
  return kernel_scale * (Scalar(1) + u + u * u / Scalar(3)) * exp(-u);
}

template <typename Scalar>
Scalar standard_normal_pdf(Scalar z) {
  using std::exp;
  return exp(Scalar(-0.5) * z * z) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar standard_normal_cdf(Scalar z) {
  using std::erfc;
  return Scalar(0.5) * erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

/// E[max(0, best - f)] for f ~ N(mean, sd^2); the improvement for sd = 0.
template <typename Scalar>
Scalar expected_improvement(Scalar mean, Scalar sd, Scalar best) {
  const Scalar gain = best - mean;
  if (!(sd > Scalar(0))) return gain > Scalar(0) ? gain : Scalar(0);
  const Scalar z = gain / sd;
  const Scalar ei = gain * standard_normal_cdf(z) + sd * standard_normal_pdf(z);
  return ei > Scalar(0) ? ei : Scalar(0);
}

struct GpHyperparameters {
  double kernel_scale = 1.0;
  double length_scale = 1.0;
  double noise_variance = 1e-8;
  double mean_const = 0.0;
};

/// One-dimensional GP regression model with constant prior mean.
struct GPSurrogate {
  std::vector<double> x;
  std::vector<double> y;
  GpHyperparameters hyper;
  double log_marginal_likelihood = 0.0;
  /// Log marginal likelihood reached from each multi-start.
  std::vector<double> start_log_likelihoods;
  Matrix chol_lower;
  Vector weights;
  double jitter = 0.0;
};

double gp_log_marginal_likelihood(const std::vector<double>& x, const std::vector<double>& y,
                                  const GpHyperparameters& hyper);

/// Conditions the GP on the data at fixed hyperparameters. Escalates diagonal
/// jitter from 1e-10 to 1e-6 (relative to kernel_scale) before failing.
GPSurrogate gp_condition(std::vector<double> x, std::vector<double> y,
                         const GpHyperparameters& hyper);

inline constexpr int kGpStarts = 8;

/// Maximizes the log marginal likelihood over (s2, l, noise) in log space by
/// seeded multi-start Nelder-Mead; the prior mean is the data mean.
GPSurrogate gp_fit(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed);

/// Latent posterior mean and variance at `x`.
std::pair<double, double> gp_posterior(const GPSurrogate& gp, double x);

double expected_improvement(const GPSurrogate& gp, double x, double best);

struct OptBudget {
  double lambda_min = 0.01;
  double lambda_max = 1.0;
  Index n_init = 4;
  Index max_iter = 30;
  Index acquisition_grid = 512;
};

void validate(const OptBudget& budget);

struct OptTraceRow {
  /// 0 for the random initial evaluations.
  Index iteration = 0;
  double lambda = 0.0;
  double loss = 0.0;
  double incumbent = 0.0;
};

struct ScalarOptimum {
  double x_best = 0.0;
  double f_best = 0.0;
  /// Index into `trace` of the incumbent evaluation.
  size_t best_eval = 0;
  std::vector<OptTraceRow> trace;
};

/// GP/expected-improvement minimization of a scalar function on [lambda_min, lambda_max].
ScalarOptimum bayes_minimize(const std::function<double(double)>& objective,
                             const OptBudget& budget, std::uint64_t seed);

struct ThresholdSelection {
  double lambda_best = 0.0;
  SparseSolution solution;
  std::vector<OptTraceRow> trace;
};

/// Chooses the STLS threshold by Bayesian optimization of the STLS loss.
ThresholdSelection bayes_opt(const StlsProblem& problem, const OptBudget& budget,
                             std::uint64_t seed);

ThresholdSelection bayes_opt(const Vector& r, const Matrix& S, const OptBudget& budget,
                             std::uint64_t seed, const LassoConfig& cfg = {},
                             double delta = kDefaultLossDelta);

}  // namespace sdid
