#include "core/tuning.hpp"

#include "core/fit.hpp"
#include "core/nelder_mead.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sbr {

namespace {

// Negative log of the exponential prior with means lambda_cv, up to a constant.
double map_penalty(const Vector& lambda, const Vector& lambda_cv) {
  require(lambda.size() == lambda_cv.size(), ErrorKind::Domain, "map_objective: K mismatch");
  double penalty = 0.0;
  for (Index k = 0; k < lambda.size(); ++k) {
    if (!(lambda_cv[k] > 0.0)) fail(ErrorKind::Domain, "map_objective: lambda_cv must be > 0");
    penalty += lambda[k] / lambda_cv[k];
  }
  return penalty;
}

}  // namespace

double cv_objective(const CoreSolve& core) {
  const Matrix inv = core.inverse();
  double rss = 0.0;
  for (Index i = 0; i < core.n(); ++i) {
    const double h = inv(i, i);
    if (!(h > 1e-300)) fail(ErrorKind::Numerical, "LOO-CV: diagonal of (I + G)^{-1} underflowed at row " + std::to_string(i));
    const double r = core.w[i] / h;
    rss += r * r;
  }
  return rss;
}

double cv_objective(const GramCache& cache, const Vector& y, const Vector& lambda) {
  return cv_objective(core_solve(assemble_g(cache, lambda), y));
}

double cv_objective(const InterceptSolve& solve) {
  double rss = 0.0;
  for (Index i = 0; i < solve.r.size(); ++i) {
    const double h = solve.p_diag[i];
    if (!(h > 1e-300)) fail(ErrorKind::Numerical, "LOO-CV: leverage complement underflowed at row " + std::to_string(i));
    const double e = solve.r[i] / h;
    rss += e * e;
  }
  return rss;
}

double ml_objective(const CoreSolve& core, Index n) { return log_marginal(core, n); }

double ml_objective(const InterceptSolve& solve) {
  if (!(solve.q > 0.0)) fail(ErrorKind::Domain, "log marginal undefined for a constant response");
  return -0.5 * solve.logdet - 0.5 * static_cast<double>(solve.dof()) * std::log(solve.q);
}

double map_objective(const CoreSolve& core, Index n, const Vector& lambda, const Vector& lambda_cv) {
  return log_marginal(core, n) - map_penalty(lambda, lambda_cv);
}

double tuning_loss(const GramCache& cache, const Vector& y, const Vector& lambda, Estimator est,
                   const Vector* lambda_cv, bool intercept) {
  if (est == Estimator::MAP) require(lambda_cv != nullptr, ErrorKind::Usage, "MAP objective needs lambda_cv");
  if (intercept) {
    const InterceptSolve s = intercept_solve(assemble_g(cache, lambda), y);
    switch (est) {
      case Estimator::CV: return cv_objective(s);
      case Estimator::ML: return -ml_objective(s);
      case Estimator::MAP: return -(ml_objective(s) - map_penalty(lambda, *lambda_cv));
      case Estimator::User: break;
    }
    fail(ErrorKind::Usage, "no objective for user-supplied lambda");
  }
  const CoreSolve core = core_solve(assemble_g(cache, lambda), y);
  switch (est) {
    case Estimator::CV: return cv_objective(core);
    case Estimator::ML: return -ml_objective(core, y.size());
    case Estimator::MAP:
      return -map_objective(core, y.size(), lambda, *lambda_cv);
    case Estimator::User: break;
  }
  fail(ErrorKind::Usage, "no objective for user-supplied lambda");
}

namespace {

bool lex_less(const Vector& a, const Vector& b) {
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

std::vector<Vector> restart_points(Index dim, const TuneConfig& cfg) {
  std::vector<Vector> starts;
  starts.push_back(Vector::Zero(dim).cwiseMax(cfg.log_lower).cwiseMin(cfg.log_upper));
  const int extra = cfg.restarts - 1;
  if (extra <= 0) return starts;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> lhs(static_cast<std::size_t>(extra), Vector(dim));
  for (Index d = 0; d < dim; ++d) {
    std::vector<int> strata(static_cast<std::size_t>(extra));
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int r = 0; r < extra; ++r) {
      const double u = (strata[static_cast<std::size_t>(r)] + unif(rng)) / extra;
      lhs[static_cast<std::size_t>(r)][d] = cfg.log_lower + u * (cfg.log_upper - cfg.log_lower);
    }
  }
  starts.insert(starts.end(), lhs.begin(), lhs.end());
  return starts;
}

TuneResult tune_single(const GramCache& cache, const Vector& y, const TuneConfig& cfg, Estimator est,
                       const Vector* lambda_cv) {
  const Index k = cache.k();
  const Index dim = cfg.tie_sources ? 1 : k;
  auto expand = [&](const Vector& logl) {
    Vector lam(k);
    for (Index i = 0; i < k; ++i) lam[i] = std::exp(cfg.tie_sources ? logl[0] : logl[i]);
    return lam;
  };

  TuneResult out;
  auto objective = [&](const Vector& logl) {
    const Vector lam = expand(logl);
    double v;
    try {
      v = tuning_loss(cache, y, lam, est, lambda_cv, cfg.intercept);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      v = std::numeric_limits<double>::infinity();
    }
    if (cfg.keep_trace) out.trace.push_back({lam, v});
    return v;
  };

  NelderMeadOptions nm;
  nm.ftol = cfg.tolerance;
  nm.xtol = cfg.tolerance;
  nm.max_evals = cfg.max_evals;
  const Vector lower = Vector::Constant(dim, cfg.log_lower);
  const Vector upper = Vector::Constant(dim, cfg.log_upper);

  bool have = false;
  Vector best_lambda;
  out.converged = true;
  for (const Vector& start : restart_points(dim, cfg)) {
    out.start_points.push_back(expand(start));
    const auto r = nelder_mead(objective, start, lower, upper, nm);
    out.evals_used += r.evals;
    out.converged = out.converged && r.converged;
    const Vector lam = expand(r.x);
    if (!have || r.f < out.objective_value || (r.f == out.objective_value && lex_less(lam, best_lambda))) {
      have = true;
      out.objective_value = r.f;
      best_lambda = lam;
    }
  }
  out.lambda_hat = {best_lambda, est};
  const double upper_l = std::exp(cfg.log_upper);
  out.at_upper_bound = (best_lambda.array() >= upper_l * (1.0 - 1e-9)).any();
  return out;
}

}  // namespace

TuneResult tune(const GramCache& cache, const Vector& y, const TuneConfig& cfg) {
  require(cache.k() >= 1 && cache.k() <= 32, ErrorKind::Usage, "tune supports 1 <= K <= 32 sources");
  require(y.size() == cache.n(), ErrorKind::Data, "tune: response length does not match Gram size");
  require(cfg.log_lower < cfg.log_upper, ErrorKind::Usage, "tune: log_lower must be < log_upper");
  require(cfg.restarts >= 1, ErrorKind::Usage, "tune: restarts must be >= 1");
  require(cfg.max_evals >= 1, ErrorKind::Usage, "tune: max_evals must be >= 1");

  switch (cfg.estimator) {
    case Estimator::CV:
    case Estimator::ML:
      return tune_single(cache, y, cfg, cfg.estimator, nullptr);
    case Estimator::MAP: {
      TuneConfig cv_cfg = cfg;
      cv_cfg.keep_trace = false;
      const TuneResult cv = tune_single(cache, y, cv_cfg, Estimator::CV, nullptr);
      TuneResult out = tune_single(cache, y, cfg, Estimator::MAP, &cv.lambda_hat.lambda);
      out.lambda_cv = cv.lambda_hat;
      out.evals_used += cv.evals_used;
      out.converged = out.converged && cv.converged;
      return out;
    }
    case Estimator::User: break;
  }
  fail(ErrorKind::Usage, "tune: estimator must be cv, ml or map");
}

}  // namespace sbr
