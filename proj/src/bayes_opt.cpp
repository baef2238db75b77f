#include "sdid/bayes_opt.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace sdid {

namespace {

constexpr double kTwoPiLog = 1.8378770664093453;  // ln(2 pi)

Matrix kernel_matrix(const std::vector<double>& x, const GpHyperparameters& h) {
  const auto n = static_cast<Index>(x.size());
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = matern52(x[static_cast<size_t>(i)], x[static_cast<size_t>(j)],
                                   h.kernel_scale, h.length_scale);
    }
  }
  return k;
}

Vector centered(const std::vector<double>& y, double mean) {
  Vector v(static_cast<Index>(y.size()));
  for (size_t i = 0; i < y.size(); ++i) v(static_cast<Index>(i)) = y[i] - mean;
  return v;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double e : v) s += (e - mean) * (e - mean);
  return s / static_cast<double>(v.size());
}

using Point3 = std::array<double, 3>;

// Nelder-Mead minimization inside a box; trial points are clamped to the box.
Point3 nelder_mead(const std::function<double(const Point3&)>& f, Point3 start, const Point3& lo,
                   const Point3& hi, int max_evals, double* f_out) {
  auto clamp = [&](Point3 p) {
    for (size_t d = 0; d < 3; ++d) p[d] = std::clamp(p[d], lo[d], hi[d]);
    return p;
  };
  std::array<Point3, 4> simplex;
  std::array<double, 4> val;
  simplex[0] = clamp(start);
  for (size_t d = 0; d < 3; ++d) {
    Point3 p = simplex[0];
    const double step = 0.1 * (hi[d] - lo[d]);
    p[d] = (p[d] + step <= hi[d]) ? p[d] + step : p[d] - step;
    simplex[d + 1] = clamp(p);
  }
  int evals = 0;
  for (size_t i = 0; i < 4; ++i) {
    val[i] = f(simplex[i]);
    ++evals;
  }

  while (evals < max_evals) {
    std::array<size_t, 4> idx{0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return val[a] < val[b]; });
    const size_t best = idx[0], worst = idx[3], second = idx[2];
    if (std::abs(val[worst] - val[best]) <= 1e-10 * (1.0 + std::abs(val[best]))) break;

    Point3 centroid{0.0, 0.0, 0.0};
    for (size_t i = 0; i < 3; ++i)
      for (size_t d = 0; d < 3; ++d) centroid[d] += simplex[idx[i]][d] / 3.0;
    auto along = [&](double t) {
      Point3 p;
      for (size_t d = 0; d < 3; ++d) p[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      return clamp(p);
    };

    const Point3 refl = along(-1.0);
    const double f_refl = f(refl);
    ++evals;
    if (f_refl < val[best]) {
      const Point3 exp = along(-2.0);
      const double f_exp = f(exp);
      ++evals;
      if (f_exp < f_refl) {
        simplex[worst] = exp;
        val[worst] = f_exp;
      } else {
        simplex[worst] = refl;
        val[worst] = f_refl;
      }
    } else if (f_refl < val[second]) {
      simplex[worst] = refl;
      val[worst] = f_refl;
    } else {
      const bool outside = f_refl < val[worst];
      const Point3 con = along(outside ? -0.5 : 0.5);
      const double f_con = f(con);
      ++evals;
      if (f_con < (outside ? f_refl : val[worst])) {
        simplex[worst] = con;
        val[worst] = f_con;
      } else {
        for (size_t i = 1; i < 4; ++i) {
          const size_t k = idx[i];
          for (size_t d = 0; d < 3; ++d)
            simplex[k][d] = simplex[best][d] + 0.5 * (simplex[k][d] - simplex[best][d]);
          val[k] = f(simplex[k]);
          ++evals;
        }
      }
    }
  }
  const auto best = static_cast<size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  *f_out = val[best];
  return simplex[best];
}

}  // namespace

double gp_log_marginal_likelihood(const std::vector<double>& x, const std::vector<double>& y,
                                  const GpHyperparameters& hyper) {
  Matrix k = kernel_matrix(x, hyper);
  k.diagonal().array() += hyper.noise_variance;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vector yc = centered(y, hyper.mean_const);
  const Vector w = llt.matrixL().solve(yc);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * w.squaredNorm() - 0.5 * log_det - 0.5 * static_cast<double>(x.size()) * kTwoPiLog;
}

GPSurrogate gp_condition(std::vector<double> x, std::vector<double> y,
                         const GpHyperparameters& hyper) {
  if (x.empty() || x.size() != y.size()) {
    throw Error(ErrorCode::InvalidArgument, "GP needs matching, non-empty inputs and outputs");
  }
  if (!(hyper.kernel_scale > 0.0) || !(hyper.length_scale > 0.0) || !(hyper.noise_variance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "GP hyperparameters must be positive");
  }
  GPSurrogate gp;
  gp.x = std::move(x);
  gp.y = std::move(y);
  gp.hyper = hyper;

  Matrix k = kernel_matrix(gp.x, hyper);
  k.diagonal().array() += hyper.noise_variance;
  const std::array<double, 6> jitters{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double j : jitters) {
    Matrix kj = k;
    kj.diagonal().array() += j * hyper.kernel_scale;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success) {
      gp.chol_lower = llt.matrixL();
      gp.weights = llt.solve(centered(gp.y, hyper.mean_const));
      gp.jitter = j;
      gp.log_marginal_likelihood = gp_log_marginal_likelihood(gp.x, gp.y, hyper);
      return gp;
    }
  }
  throw Error(ErrorCode::Covariance, "GP covariance not positive definite after jitter 1e-6");
}

GPSurrogate gp_fit(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed) {
  if (x.size() < 2 || x.size() != y.size()) {
    throw Error(ErrorCode::InvalidArgument, "GP fit needs at least two observations");
  }
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::NonFinite, "GP observations must be finite");
    }
  }
  const double mean = mean_of(y);
  const double var = variance_of(y, mean);
  const double scale = std::max(1.0, mean * mean);

  if (!(var > 1e-14 * scale)) {
    // Flat data: noise floor and flat mean.
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    GpHyperparameters h;
    h.mean_const = mean;
    h.kernel_scale = 1e-6 * scale;
    h.length_scale = std::max(*hi - *lo, 1e-3);
    h.noise_variance = 1e-8;
    GPSurrogate gp = gp_condition(x, y, h);
    gp.start_log_likelihoods.assign(kGpStarts, gp.log_marginal_likelihood);
    return gp;
  }

  const Point3 lo{std::log(1e-6 * var), std::log(1e-3), std::log(std::min(1e-8, 1e-3 * var))};
  const Point3 hi{std::log(10.0 * var), std::log(10.0), std::log(var)};
  auto to_hyper = [&](const Point3& p) {
    GpHyperparameters h;
    h.kernel_scale = std::exp(p[0]);
    h.length_scale = std::exp(p[1]);
    h.noise_variance = std::exp(p[2]);
    h.mean_const = mean;
    return h;
  };
  auto neg_lml = [&](const Point3& p) {
    const double v = gp_log_marginal_likelihood(x, y, to_hyper(p));
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };

  std::mt19937_64 rng(seed);
  std::vector<double> start_lml;
  Point3 best_p{};
  double best_f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kGpStarts; ++s) {
    Point3 start;
    for (size_t d = 0; d < 3; ++d) {
      start[d] = std::uniform_real_distribution<double>(lo[d], hi[d])(rng);
    }
    start_lml.push_back(-neg_lml(start));
    double f = 0.0;
    const Point3 p = nelder_mead(neg_lml, start, lo, hi, 200, &f);
    if (f < best_f) {
      best_f = f;
      best_p = p;
    }
  }
  GPSurrogate gp = gp_condition(x, y, to_hyper(best_p));
  gp.start_log_likelihoods = std::move(start_lml);
  return gp;
}

std::pair<double, double> gp_posterior(const GPSurrogate& gp, double x) {
  if (gp.x.empty() || gp.weights.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "GP has not been conditioned on data");
  }
  const auto n = static_cast<Index>(gp.x.size());
  Vector ks(n);
  for (Index i = 0; i < n; ++i) {
    ks(i) = matern52(x, gp.x[static_cast<size_t>(i)], gp.hyper.kernel_scale, gp.hyper.length_scale);
  }
  const double mean = gp.hyper.mean_const + ks.dot(gp.weights);
  const Vector v = gp.chol_lower.triangularView<Eigen::Lower>().solve(ks);
  const double var = std::max(0.0, gp.hyper.kernel_scale - v.squaredNorm());
  return {mean, var};
}

double expected_improvement(const GPSurrogate& gp, double x, double best) {
  const auto [mean, var] = gp_posterior(gp, x);
  return expected_improvement(mean, std::sqrt(var), best);
}

void validate(const OptBudget& b) {
  if (!(b.lambda_min > 0.0) || !(b.lambda_max > b.lambda_min) || b.n_init < 1 ||
      b.max_iter < 0 || b.acquisition_grid < 3) {
    throw Error(ErrorCode::InvalidArgument, "invalid optimization budget");
  }
}

ScalarOptimum bayes_minimize(const std::function<double(double)>& objective,
                             const OptBudget& budget, std::uint64_t seed) {
  validate(budget);
  const double lo = budget.lambda_min;
  const double hi = budget.lambda_max;
  const double step = (hi - lo) / static_cast<double>(budget.acquisition_grid - 1);

  ScalarOptimum out;
  std::vector<double> xs, ys;
  auto evaluate = [&](double x, Index iteration) {
    const double f = objective(x);
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::NonFinite, "objective is not finite at " + std::to_string(x));
    }
    xs.push_back(x);
    ys.push_back(f);
    if (out.trace.empty() || f < out.f_best) {
      out.f_best = f;
      out.x_best = x;
      out.best_eval = out.trace.size();
    }
    out.trace.push_back({iteration, x, f, out.f_best});
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(lo, hi);
  for (Index i = 0; i < budget.n_init; ++i) evaluate(uniform(rng), 0);

  std::vector<double> grid(static_cast<size_t>(budget.acquisition_grid));
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;

  for (Index it = 1; it <= budget.max_iter; ++it) {
    double next = 0.0;
    if (xs.size() < 2) {
      next = uniform(rng);
    } else {
      const GPSurrogate gp = gp_fit(xs, ys, seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(it)));
      auto ei = [&](double x) { return expected_improvement(gp, x, out.f_best); };

      size_t arg = 0;
      double best_ei = -1.0;
      for (size_t i = 0; i < grid.size(); ++i) {
        const double v = ei(grid[i]);
        if (v > best_ei) {
          best_ei = v;
          arg = i;
        }
      }
      const auto [y_lo, y_hi] = std::minmax_element(ys.begin(), ys.end());
      const double ei_floor = 1e-4 * std::max({std::abs(out.f_best), *y_hi - *y_lo, 1e-12});
      const bool revisits = std::any_of(xs.begin(), xs.end(), [&](double x) {
        return std::abs(x - grid[arg]) < 1.5 * step;
      });
      if (best_ei < ei_floor || revisits) {
        // Negligible gain, or more of an explored neighbourhood: sample the
        // least-known point instead.
        double best_var = -1.0;
        for (size_t i = 0; i < grid.size(); ++i) {
          const double v = gp_posterior(gp, grid[i]).second;
          if (v > best_var) {
            best_var = v;
            arg = i;
          }
        }
        next = grid[arg];
      } else {
        // One golden-section pass on the bracketing grid cell pair.
        double a = grid[arg == 0 ? 0 : arg - 1];
        double b = grid[std::min(arg + 1, grid.size() - 1)];
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = ei(c), fd = ei(d);
        for (int k = 0; k < 40 && (b - a) > 1e-9; ++k) {
          if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = ei(c);
          } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = ei(d);
          }
        }
        const double refined = 0.5 * (a + b);
        next = ei(refined) > best_ei ? refined : grid[arg];
      }
    }
    for (int guard = 0; guard < 8; ++guard) {
      const bool duplicate = std::any_of(xs.begin(), xs.end(),
                                         [&](double x) { return std::abs(x - next) < 1e-6; });
      if (!duplicate) break;
      next = (next + step <= hi) ? next + step : next - step;
    }
    evaluate(next, it);
  }
  return out;
}

ThresholdSelection bayes_opt(const StlsProblem& problem, const OptBudget& budget,
                             std::uint64_t seed) {
  std::vector<SparseSolution> evaluated;
  const ScalarOptimum opt = bayes_minimize(
      [&](double lambda) {
        evaluated.push_back(stls(problem, lambda));
        return evaluated.back().loss;
      },
      budget, seed);
  ThresholdSelection sel;
  sel.lambda_best = opt.x_best;
  sel.solution = std::move(evaluated[opt.best_eval]);
  sel.trace = opt.trace;
  return sel;
}

ThresholdSelection bayes_opt(const Vector& r, const Matrix& S, const OptBudget& budget,
                             std::uint64_t seed, const LassoConfig& cfg, double delta) {
  return bayes_opt(prepare_stls(r, S, cfg, seed, delta), budget, seed);
}

}  // namespace sdid
