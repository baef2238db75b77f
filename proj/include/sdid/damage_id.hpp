#pragma once

#include "sdid/bayes_opt.hpp"
#include "sdid/sparse_id.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdid {

enum class Regularizer { Stls, Lasso, Ridge };

const char* to_string(Regularizer method);

struct DamageIdOptions {
  SensitivityWeights weights;
  LassoConfig lasso;
  OptBudget budget;
  double delta = kDefaultLossDelta;
  double outer_tol = 1e-6;
  Index outer_max = 20;
  std::uint64_t seed = 0;
  Regularizer method = Regularizer::Stls;
  /// When set, STLS uses this threshold instead of Bayesian optimization.
  double fixed_lambda = 0.0;
  /// Refit the damage support by least squares once STLS stops adding to it.
  bool refit_support = false;
};

struct DamageRecord {
  Vector delta_theta;
  double lambda = 0.0;
  double eta = 0.0;
  double loss = 0.0;
  double residue_norm = 0.0;
  double relative_increment = 0.0;
  bool guard = false;
  /// Times the step was halved because the nonlinear residue grew.
  Index halvings = 0;
  /// The optimizer's threshold overshot and another evaluated one was used.
  bool fallback = false;
  /// STLS added nothing and the step is a least-squares refit of the current support.
  bool refit = false;
  std::vector<OptTraceRow> trace;
};

struct DamageResult {
  /// Damage coefficients relative to the intact baseline.
  Vector theta_dmg;
  std::vector<Index> support;
  std::vector<DamageRecord> history;
  bool converged = false;
};

/// Outer sensitivity loop of the damage stage. The damaged model is the intact
/// baseline with element i scaled by (1 + theta_dmg_i).
///
/// An STLS step is dropped when it stays on the guard path or when it does not
/// beat the zero increment: |r - S dtheta| plus the l0 term for elements it
/// adds to the damage support found so far must be below |r|.
///
/// If the selected step raises the nonlinear residue, the other thresholds the
/// optimizer evaluated are tried in order of loss and the first whose step
/// lowers it is used. Failing that, the step is halved (at most 10 times).
///
/// With refit_support, when STLS yields no step but damage has already been
/// found, the current support is refitted by least squares, provided that
/// lowers the residue. Thresholds act on increments, so corrections smaller
/// than lambda_min are otherwise never made.
DamageResult run_damage_id(const AssembledSystem& sys, const ParameterVector& theta_intact,
                           std::span<const ModalData> measured_damaged,
                           const DamageIdOptions& opts);

/// |estimate - truth| / |truth|, or |estimate| when truth is zero.
double relative_l2_error(const Vector& estimate, const Vector& truth);

struct ComparisonRow {
  Regularizer method = Regularizer::Stls;
  Vector theta_dmg;
  double relative_error = 0.0;
  bool converged = false;
  Index iterations = 0;
};

/// Runs STLS, LASSO and ridge through the same outer loop.
std::vector<ComparisonRow> compare_regularizers(const AssembledSystem& sys,
                                                const ParameterVector& theta_intact,
                                                std::span<const ModalData> measured_damaged,
                                                const Vector& truth, const DamageIdOptions& opts);

}  // namespace sdid
