#pragma once

#include "core/common.hpp"
#include "core/gram.hpp"

#include <optional>
#include <vector>

namespace sbr {

struct TuneConfig {
  Estimator estimator = Estimator::MAP;
  double log_lower = -12.0;  // natural log of lambda
  double log_upper = 12.0;
  int restarts = 5;
  double tolerance = 1e-6;
  int max_evals = 2000;  // per restart
  std::uint64_t seed = 20190301;
  bool keep_trace = false;
  // Single shared lambda for all sources (classical ridge).
  bool tie_sources = false;
  // Integrate out an unpenalized intercept in the CV and ML objectives (see
  // intercept_solve). Centering the columns leaves G_lambda singular along
  // the ones vector; without this both objectives favour lambda -> 0 when
  // p > n.
  bool intercept = true;
};

struct TracePoint {
  Vector lambda;
  double objective;
};

struct TuneResult {
  Shrinkage lambda_hat;
  // Minimized form: RSS_CV for CV, negated log objective for ML and MAP.
  double objective_value = 0.0;
  int evals_used = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
  std::optional<Shrinkage> lambda_cv;  // MAP only: the prior means used
  std::vector<Vector> start_points;    // lambda at each restart's start
  bool at_upper_bound = false;
};

/// Closed-form leave-one-out RSS: sum_i (e_i / A_ii)^2 with e = A y and
/// A = (I + G_lambda)^{-1}.
double cv_objective(const GramCache& cache, const Vector& y, const Vector& lambda);
double cv_objective(const CoreSolve& core);

/// Leave-one-out RSS when each fold also refits the intercept:
/// sum_i ((P y)_i / P_ii)^2.
double cv_objective(const InterceptSolve& solve);

/// log m(y | lambda) up to a lambda-free constant.
double ml_objective(const CoreSolve& core, Index n);

/// Marginal likelihood with the intercept integrated out under a flat prior:
/// -0.5 log|I + Q^T G Q| - ((n - 1) / 2) log(y^T P y).
double ml_objective(const InterceptSolve& solve);

/// ML objective plus the log exponential prior with means lambda_cv.
double map_objective(const CoreSolve& core, Index n, const Vector& lambda, const Vector& lambda_cv);

/// Minimization form of the chosen estimator's objective at lambda.
double tuning_loss(const GramCache& cache, const Vector& y, const Vector& lambda, Estimator est,
                   const Vector* lambda_cv = nullptr, bool intercept = false);

/// Multi-start bounded Nelder-Mead over log(lambda). MAP first tunes CV to
/// obtain the prior means.
TuneResult tune(const GramCache& cache, const Vector& y, const TuneConfig& cfg);

}  // namespace sbr
