#include "sdid/damage_id.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdid {

const char* to_string(Regularizer method) {
  switch (method) {
    case Regularizer::Stls: return "stls";
    case Regularizer::Lasso: return "lasso";
    case Regularizer::Ridge: return "ridge";
  }
  return "unknown";
}

namespace {

constexpr Index kMaxStepHalvings = 10;

double residue_norm_at(const AssembledSystem& intact, const Vector& theta,
                       std::span<const ModalData> measured, const SensitivityWeights& weights) {
  double sq = 0.0;
  try {
    for (const auto& m : measured) {
      sq += assemble_sensitivity(intact, theta, m, weights).residue.squaredNorm();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MatchFailure || e.code() == ErrorCode::DegenerateMode) {
      return std::numeric_limits<double>::infinity();
    }
    throw;
  }
  return std::sqrt(sq);
}

}  // namespace

DamageResult run_damage_id(const AssembledSystem& sys, const ParameterVector& theta_intact,
                           std::span<const ModalData> measured_damaged,
                           const DamageIdOptions& opts) {
  if (measured_damaged.empty()) {
    throw Error(ErrorCode::InvalidArgument, "at least one damaged measurement set is required");
  }
  const AssembledSystem intact = rebase(sys, theta_intact);

  DamageResult out;
  out.theta_dmg = Vector::Zero(sys.n_ele());
  std::vector<SensitivitySystem> systems(measured_damaged.size());

  for (Index k = 1; k <= opts.outer_max; ++k) {
    for (size_t n = 0; n < measured_damaged.size(); ++n) {
      systems[n] = assemble_sensitivity(intact, out.theta_dmg, measured_damaged[n], opts.weights);
    }
    const auto [r, S] = stack(systems);
    const std::uint64_t seed = opts.seed + 7919ULL * static_cast<std::uint64_t>(k);

    DamageRecord rec;
    rec.residue_norm = r.norm();
    Vector step;
    // A step must beat the zero increment. The l0 term is charged only for
    // elements it adds to the damage support found so far.
    const Index support_now = count_nonzero(out.theta_dmg);
    const auto beats_zero = [&](const SparseSolution& sol, double penalty) {
      if (sol.guard) return false;
      const Index added = count_nonzero(out.theta_dmg + sol.delta_theta) - support_now;
      const double misfit = sol.loss - penalty * static_cast<double>(count_nonzero(sol.delta_theta));
      return misfit + penalty * static_cast<double>(std::max<Index>(added, 0)) < rec.residue_norm;
    };
    const auto lowers_residue = [&](const Vector& candidate) {
      return !((out.theta_dmg + candidate).array() <= -0.95).any() &&
             residue_norm_at(intact, out.theta_dmg + candidate, measured_damaged, opts.weights) <=
                 rec.residue_norm;
    };
    switch (opts.method) {
      case Regularizer::Stls: {
        const StlsProblem problem = prepare_stls(r, S, opts.lasso, seed, opts.delta);
        rec.eta = problem.eta;
        if (opts.fixed_lambda > 0.0) {
          const SparseSolution sol = stls(problem, opts.fixed_lambda);
          rec.lambda = opts.fixed_lambda;
          rec.loss = sol.loss;
          rec.guard = !beats_zero(sol, problem.penalty);
          step = rec.guard ? Vector::Zero(sys.n_ele()) : sol.delta_theta;
        } else {
          ThresholdSelection sel = bayes_opt(problem, opts.budget, seed);
          rec.lambda = sel.lambda_best;
          rec.loss = sel.solution.loss;
          rec.guard = !beats_zero(sel.solution, problem.penalty);
          step = rec.guard ? Vector::Zero(sys.n_ele()) : sel.solution.delta_theta;
          if (!rec.guard && !lowers_residue(step)) {
            // The chosen threshold overshoots on the nonlinear model; take the
            // best other evaluated threshold whose step does not.
            std::vector<OptTraceRow> rows = sel.trace;
            std::stable_sort(rows.begin(), rows.end(),
                             [](const auto& a, const auto& b) { return a.loss < b.loss; });
            for (const auto& row : rows) {
              if (row.lambda == sel.lambda_best) continue;
              const SparseSolution sol = stls(problem, row.lambda);
              if (!beats_zero(sol, problem.penalty) || !lowers_residue(sol.delta_theta)) continue;
              rec.lambda = row.lambda;
              rec.loss = sol.loss;
              rec.fallback = true;
              step = sol.delta_theta;
              break;
            }
          }
          rec.trace = std::move(sel.trace);
        }
        if (opts.refit_support && rec.guard && support_now > 0) {
          // Nothing new to add; refit the elements already found damaged.
          const std::vector<Index> support = support_of(out.theta_dmg);
          Matrix sb(S.rows(), static_cast<Index>(support.size()));
          for (size_t c = 0; c < support.size(); ++c) sb.col(static_cast<Index>(c)) = S.col(support[c]);
          const Vector xb = min_norm_lstsq(sb, r);
          Vector refit = Vector::Zero(sys.n_ele());
          for (size_t c = 0; c < support.size(); ++c) refit(support[c]) = xb(static_cast<Index>(c));
          if ((r - sb * xb).norm() < rec.residue_norm && lowers_residue(refit)) {
            step = refit;
            rec.refit = true;
          }
        }
        break;
      }
      case Regularizer::Lasso: {
        const CvSelection sel = select_eta_cv(r, S, opts.lasso, seed);
        rec.eta = sel.eta;
        step = sel.coefficients;
        break;
      }
      case Regularizer::Ridge: {
        const CvSelection sel = ridge_cv(r, S, opts.lasso, seed);
        rec.eta = sel.eta;
        step = sel.coefficients;
        break;
      }
    }

    while (((out.theta_dmg + step).array() <= -0.95).any()) step *= 0.5;
    // Backtrack while the full nonlinear residue grows; the linearization is
    // poor for large stiffness changes.
    for (Index h = 0; h < kMaxStepHalvings && step.squaredNorm() > 0.0; ++h) {
      if (residue_norm_at(intact, out.theta_dmg + step, measured_damaged, opts.weights) <=
          rec.residue_norm) {
        break;
      }
      step *= 0.5;
      ++rec.halvings;
    }
    out.theta_dmg += step;
    rec.delta_theta = step;
    rec.relative_increment = step.norm() / std::max(out.theta_dmg.norm(), 1.0);
    out.history.push_back(std::move(rec));
    if (out.history.back().relative_increment < opts.outer_tol) {
      out.converged = true;
      break;
    }
  }
  out.support = support_of(out.theta_dmg);
  return out;
}

double relative_l2_error(const Vector& estimate, const Vector& truth) {
  const double tn = truth.norm();
  const double en = (estimate - truth).norm();
  return tn > 0.0 ? en / tn : en;
}

std::vector<ComparisonRow> compare_regularizers(const AssembledSystem& sys,
                                                const ParameterVector& theta_intact,
                                                std::span<const ModalData> measured_damaged,
                                                const Vector& truth, const DamageIdOptions& opts) {
  std::vector<ComparisonRow> rows;
  for (Regularizer m : {Regularizer::Stls, Regularizer::Lasso, Regularizer::Ridge}) {
    DamageIdOptions o = opts;
    o.method = m;
    const DamageResult res = run_damage_id(sys, theta_intact, measured_damaged, o);
    ComparisonRow row;
    row.method = m;
    row.theta_dmg = res.theta_dmg;
    row.relative_error = relative_l2_error(res.theta_dmg, truth);
    row.converged = res.converged;
    row.iterations = static_cast<Index>(res.history.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sdid
